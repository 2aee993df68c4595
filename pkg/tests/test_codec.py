import itertools
import random

import pytest

from abcast.codec import (
    InsufficientShards,
    MerkleProof,
    MerkleTree,
    leaf_hash,
    merkle_prove,
    merkle_root,
    merkle_verify,
    rs_decode,
    rs_encode,
)
from abcast.codec.merkle import node_hash
from abcast.core.hashing import hash_bytes


def test_repetition_code_when_k_is_one():
    cw = rs_encode(b"payload", 1, 3)
    assert cw.shards == (b"payload",) * 3


def test_systematic_prefix():
    cw = rs_encode(b"abcd", 2, 4)
    assert b"".join(cw.shards[:2]) == b"abcd"
    assert all(len(s) == 2 for s in cw.shards)


def test_shard_length_is_padded_ceiling():
    cw = rs_encode(b"x" * 10, 3, 7)
    assert {len(s) for s in cw.shards} == {4}


@pytest.mark.parametrize("n", range(4, 11))
def test_every_subset_decodes(n):
    f = (n - 1) // 3
    k = f + 1
    rng = random.Random(n)
    payload = bytes(rng.randrange(256) for _ in range(rng.randint(1, 300)))
    cw = rs_encode(payload, k, n)
    for subset in itertools.combinations(range(n), k):
        assert rs_decode([(i, cw.shards[i]) for i in subset], k, n, len(payload)) == payload


def test_sampled_payload_round_trip():
    rng = random.Random(77)
    for case in range(500):
        n = rng.choice((4, 7, 10, 13))
        k = (n - 1) // 3 + 1
        size = rng.choice((1, 2, 17, 255, 1024, rng.randint(1, 65536)))
        payload = rng.randbytes(size)
        cw = rs_encode(payload, k, n)
        subset = rng.sample(range(n), k)
        assert rs_decode([(i, cw.shards[i]) for i in subset], k, n, size) == payload


def test_duplicate_indices_are_insufficient():
    cw = rs_encode(b"abcdef", 2, 4)
    with pytest.raises(InsufficientShards):
        rs_decode([(3, cw.shards[3]), (3, cw.shards[3])], 2, 4, 6)


def test_bad_parameters():
    with pytest.raises(ValueError):
        rs_encode(b"", 2, 4)
    with pytest.raises(ValueError):
        rs_encode(b"a", 5, 4)
    cw = rs_encode(b"abcdef", 2, 4)
    with pytest.raises(ValueError):
        rs_decode([(9, cw.shards[0]), (1, cw.shards[1])], 2, 4, 6)


def test_corrupted_shard_fails_reencode_check():
    """Decoding garbage still yields bytes; re-encoding exposes it."""
    for n in (4, 7):
        k = (n - 1) // 3 + 1
        payload = random.Random(n).randbytes(97)
        cw = rs_encode(payload, k, n)
        root = merkle_root(cw.shards)
        for victim in range(n):
            shards = list(cw.shards)
            shards[victim] = bytes([shards[victim][0] ^ 1]) + shards[victim][1:]
            bad_root = merkle_root(shards)
            for subset in itertools.combinations(range(n), k):
                if victim not in subset:
                    continue
                out = rs_decode([(i, shards[i]) for i in subset], k, n, len(payload))
                again = merkle_root(rs_encode(out, k, n).shards)
                assert again != bad_root
                assert again != root or out == payload


# merkle

def test_single_leaf_tree():
    tree = MerkleTree([b"only"])
    assert tree.root == leaf_hash(b"only")
    proof = tree.prove(0)
    assert proof.path == ()
    assert merkle_verify(tree.root, 0, b"only", proof, 1)


def test_round_trip_all_indices():
    for size in range(1, 14):
        leaves = [bytes([i]) * 5 for i in range(size)]
        root = merkle_root(leaves)
        for i in range(size):
            assert merkle_verify(root, i, leaves[i], merkle_prove(leaves, i), size)


def test_swapped_leaves_break_old_proofs():
    leaves = [b"a", b"b", b"c", b"d"]
    root = merkle_root(leaves)
    proofs = [merkle_prove(leaves, i) for i in range(4)]
    for i, j in itertools.combinations(range(4), 2):
        swapped = list(leaves)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        new_root = merkle_root(swapped)
        assert new_root != root
        assert not merkle_verify(new_root, i, swapped[i], proofs[i], 4)
        assert not merkle_verify(root, i, swapped[i], proofs[i], 4)


def _flip(data: bytes, bit: int) -> bytes:
    b = bytearray(data)
    b[bit // 8] ^= 1 << (bit % 8)
    return bytes(b)


def test_every_single_bit_mutation_rejected():
    leaves = [bytes([i]) * 6 for i in range(7)]
    tree = MerkleTree(leaves)
    for i in range(7):
        proof = tree.prove(i)
        for bit in range(len(leaves[i]) * 8):
            assert not merkle_verify(tree.root, i, _flip(leaves[i], bit), proof, 7)
        for level, sib in enumerate(proof.path):
            for bit in range(256):
                path = list(proof.path)
                path[level] = _flip(sib, bit)
                assert not merkle_verify(tree.root, i, leaves[i], MerkleProof(i, tuple(path)), 7)
        for bit in range(256):
            assert not merkle_verify(_flip(tree.root, bit), i, leaves[i], proof, 7)
        for j in range(7):
            if j != i:
                assert not merkle_verify(tree.root, j, leaves[i], MerkleProof(j, proof.path), 7)


def test_out_of_range_index():
    tree = MerkleTree([b"a", b"b", b"c"])
    with pytest.raises(IndexError):
        tree.prove(3)
    assert not merkle_verify(tree.root, 3, b"a", MerkleProof(3, tree.prove(0).path), 3)
    with pytest.raises(ValueError):
        MerkleTree([])


def test_leaf_and_node_domains_differ():
    a, b = leaf_hash(b"a"), leaf_hash(b"b")
    assert node_hash(a, b) != hash_bytes(a + b, "merkle-leaf")
    assert leaf_hash(a + b) != node_hash(a, b)
