"""Agreement on large values by dispersal, then recast of the winner only.

Each attempt a of epoch e uses two sessions:

    ("pd", e, a)   STORE (root, fragment, path, length)   to each node
                   STORED (root, length, sig)              back to the sender
                   RCLOCK lock                             multicast, once per instance
                   RCSTORE (sender, root, fragment, path)  multicast, once per instance
    ("ji", e, a)   the inner MVBA, whose inputs are locks

The inner MVBA only accepts valid locks of this attempt from senders not on
the ignore list. Once it decides, every node recasts that sender's value.
If reconstruction fails, or the value fails the outer predicate, the
sender goes on the ignore list and a fresh attempt starts.
"""

from __future__ import annotations

from ..agreement.mvba import FinMvba
from ..broadcast.rbc import ACCEPT, PENDING, REJECT
from ..crypto.qc import auth_size_of
from .dispersal import BOTTOM, Store, assemble_lock, disperse, fragment_auth, recover, stored_message, validate_lock

ATTEMPT_WINDOW = 16


class _Attempt:
    def __init__(self, owner, a: int):
        self.owner = owner
        self.a = a
        e = owner.epoch
        self.pd_session = ("pd", e, a)
        self.stores: dict = {}  # sender -> Store holding our fragment of its value
        self.my_root = None
        self.my_length = None
        self.stored_sigs: dict = {}
        self.lock = None
        self.locks: dict = {}  # sender -> first valid lock seen
        self.rc_sent: set = set()
        self.fragments: dict = {}  # (sender, root) -> {index: fragment}
        self.decided_lock = None
        self.result = None
        self.done = False
        self.frag_auth = 0
        owner.rt.register(self.pd_session, self)
        self.inner = FinMvba(owner.rt, ("ji", e, a), self._lock_ok, owner.abandon, self._inner_decided)

    def _lock_ok(self, lock) -> str:
        ow = self.owner
        if not validate_lock(lock, ow.backend, ow.f) or lock.instance[0] != self.pd_session:
            return REJECT
        if lock.sender in ow.ignore or not 0 <= lock.sender < ow.n:
            return REJECT
        return ACCEPT

    # dispersal

    def disperse(self, payload: bytes, auth: int) -> None:
        ow = self.owner
        stores = disperse(payload, ow.n, ow.f)
        self.my_root = stores[0].root
        self.my_length = len(payload)
        size = stores[0].wire_size
        self.frag_auth = fragment_auth(size, len(payload), auth)
        for j, st in enumerate(stores):
            ow.rt.send(j, self.pd_session, "STORE", (st.root, st.fragment, st.proof, st.length), self.frag_auth)

    def handle(self, src, kind, body) -> None:
        try:
            if kind == "STORE":
                self._on_store(src, *body)
            elif kind == "STORED":
                self._on_stored(src, *body)
            elif kind == "RCLOCK":
                self._on_lock(body)
            elif kind == "RCSTORE":
                self._on_rcstore(src, *body)
        except (TypeError, ValueError, IndexError):
            return

    def _on_store(self, src, root, fragment, path, length) -> None:
        ow = self.owner
        if src in self.stores or not 0 <= src < ow.n or type(length) is not int:
            return
        st = Store(root, ow.me, fragment, tuple(path), length)
        if not isinstance(root, bytes) or not isinstance(fragment, bytes) or not st.valid(ow.n):
            return
        self.stores[src] = st
        sig = ow.backend.sign(ow.me, stored_message((self.pd_session, src), root, length))
        ow.rt.send(src, self.pd_session, "STORED", (root, length, sig), len(sig) + 5)
        if src in self.locks:
            self._send_rcstore(src)

    def _on_stored(self, src, root, length, sig) -> None:
        if self.lock is not None or root != self.my_root or length != self.my_length or src in self.stored_sigs:
            return
        if not isinstance(sig, bytes):
            return
        ow = self.owner
        self.stored_sigs[src] = sig
        if len(self.stored_sigs) < 2 * ow.f + 1:
            return
        lock = assemble_lock((self.pd_session, ow.me), root, length, self.stored_sigs, ow.rt.blocklist, ow.backend, ow.f, ow.rt.verify_stats)
        if lock is not None:
            self.lock = lock
            if self.inner.input is None:
                self.inner.start(lock)

    # recast

    def _inner_decided(self, inner, lock) -> None:
        self.decided_lock = lock
        self._on_lock(lock)
        self._try_recover()

    def _on_lock(self, lock) -> None:
        ow = self.owner
        if not validate_lock(lock, ow.backend, ow.f) or lock.instance[0] != self.pd_session:
            return
        j = lock.sender
        if j in self.locks:
            return
        self.locks[j] = lock
        ow.rt.multicast(self.pd_session, "RCLOCK", lock, lock.auth_size)
        self._send_rcstore(j)

    def _send_rcstore(self, j) -> None:
        st = self.stores.get(j)
        if st is None or j in self.rc_sent:
            return
        self.rc_sent.add(j)
        ow = self.owner
        # other senders' values are opaque here; assume they carry our own value's share of signatures
        auth = fragment_auth(st.wire_size, 1, ow.auth_ratio)
        ow.rt.multicast(self.pd_session, "RCSTORE", (j, st.root, st.fragment, st.proof), auth)

    def _on_rcstore(self, src, j, root, fragment, path) -> None:
        ow = self.owner
        if not isinstance(root, bytes) or not isinstance(fragment, bytes):
            return
        lock = self.locks.get(j)
        if lock is not None and lock.root != root:
            return
        group = self.fragments.setdefault((j, root), {})
        if src in group:
            return
        if not Store(root, src, fragment, tuple(path), 0).valid(ow.n):
            return
        group[src] = fragment
        self._try_recover()

    def _try_recover(self) -> None:
        lock = self.decided_lock
        if lock is None or self.done:
            return
        ow = self.owner
        group = self.fragments.get((lock.sender, lock.root), {})
        if len(group) < ow.f + 1:
            return
        self.done = True
        payload = recover(group, lock.root, lock.length, ow.n, ow.f)
        ow._recast(self, lock, payload)


class DispersalMvba:
    """One epoch of dispersal-then-recast agreement at one node.

    ``encode_value(v) -> bytes`` and ``decode_value(bytes) -> v`` convert
    inputs; ``predicate(v)`` is the outer validity check. ``on_decide``
    receives (self, value).
    """

    def __init__(self, rt, epoch: int, encode_value, decode_value, predicate, on_decide, abandon: bool = True):
        self.rt = rt
        self.me = rt.id
        self.n = rt.n
        self.f = rt.f
        self.backend = rt.backend
        self.epoch = epoch
        self.encode_value = encode_value
        self.decode_value = decode_value
        self.predicate = predicate
        self.on_decide = on_decide
        self.abandon = abandon
        self.ignore: set = set()
        self.input = None
        self.payload = None
        self.auth_ratio = 0.0
        self.attempts: dict = {}
        self.attempt = 0
        self.early: dict = {}
        self.pending = None  # (attempt, value) waiting on the outer predicate
        self.decided = None
        self.has_decided = False
        self.rounds = 0
        self.session = ("dm", epoch)
        self._open(0)

    def _open(self, a: int) -> None:
        self.attempt = a
        self.attempts[a] = _Attempt(self, a)
        if self.payload is not None:
            self.attempts[a].disperse(self.payload, auth_size_of(self.input))
        for src, kind, session, body in self.early.pop(a, ()):
            self.rt.deliver(src, kind, session, body)

    def start(self, value) -> None:
        assert self.input is None, "epoch already has an input"
        self.input = value
        self.payload = self.encode_value(value)
        self.auth_ratio = auth_size_of(value) / max(len(self.payload), 1)
        if not self.has_decided:
            self.attempts[self.attempt].disperse(self.payload, auth_size_of(value))

    def park(self, src, kind, session, body) -> bool:
        """Hold messages of attempts we have not opened yet."""
        a = session[2] if len(session) > 2 else None
        if isinstance(a, int) and self.attempt < a <= self.attempt + ATTEMPT_WINDOW:
            self.early.setdefault(a, []).append((src, kind, session, body))
            return True
        return False

    def reevaluate(self) -> None:
        if self.pending is not None and not self.has_decided:
            att, value = self.pending
            self._judge(att, value)

    def _recast(self, att, lock, payload) -> None:
        if att.a != self.attempt or self.has_decided:
            return
        value = BOTTOM
        if payload is not BOTTOM:
            try:
                value = self.decode_value(payload)
            except Exception:
                value = BOTTOM
        self._judge(att, value, lock)

    def _judge(self, att, value, lock=None) -> None:
        lock = lock or att.decided_lock
        verdict = REJECT if value is BOTTOM else self.predicate(value)
        if verdict == PENDING:
            self.pending = (att, value)
            return
        self.pending = None
        att.result = value
        if verdict == ACCEPT:
            self.has_decided = True
            self.decided = value
            self.rounds = att.a + 1
            self.on_decide(self, value)
            return
        self.ignore.add(lock.sender)
        self._open(att.a + 1)
