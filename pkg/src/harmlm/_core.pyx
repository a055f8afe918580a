# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: backoff n-gram scoring over open-addressing tables,
and the 64-bit FNV-1a hash used for feature hashing."""

from cpython.unicode cimport Py_UNICODE_ISALNUM, Py_UNICODE_ISSPACE
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc

cdef enum:
    MAX_ORDER = 6

cdef uint64_t FNV_OFFSET = 0xcbf29ce484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001b3ULL


cpdef uint64_t fnv1a64(bytes data):
    cdef uint64_t h = FNV_OFFSET
    cdef const unsigned char* p = data
    cdef Py_ssize_t i, n = len(data)
    for i in range(n):
        h ^= p[i]
        h *= FNV_PRIME
    return h


cdef inline uint64_t _step(uint64_t h, int32_t x) noexcept nogil:
    # FNV-style absorb of one id, then avalanche at lookup time
    h ^= <uint64_t>(<uint32_t>x)
    h *= FNV_PRIME
    return h


cdef inline uint64_t _finish(uint64_t h) noexcept nogil:
    h ^= h >> 33
    h *= 0xff51afd7ed558ccdULL
    h ^= h >> 33
    h *= 0xc4ceb9fe1a85ec53ULL
    h ^= h >> 33
    return h


# Each entry packs log10 p, log10 backoff and the k ids in one record so a
# hit touches one cache line; slots keep the full hash so misses rarely
# touch entries at all.
cdef struct Entry:
    double logp
    double bow

cdef struct Slot:
    uint64_t h
    int64_t row

cdef struct Table:
    int k
    int64_t n
    uint64_t mask
    Py_ssize_t stride
    Slot* slots
    char* entries


cdef inline Entry* _entry(Table* t, int64_t row) noexcept nogil:
    return <Entry*>(t.entries + row * t.stride)


cdef inline int32_t* _key(Entry* e) noexcept nogil:
    return <int32_t*>(<char*>e + sizeof(Entry))


cdef Entry* _find(Table* t, const int32_t* ids, int64_t start, uint64_t h) noexcept nogil:
    """Entry of the k-gram ids[start:start+k] whose right-to-left hash is h, or NULL."""
    cdef uint64_t fh = _finish(h)
    cdef uint64_t pos = fh & t.mask
    cdef Slot* slot
    cdef Entry* e
    cdef const int32_t* key
    cdef int j, k = t.k
    while True:
        slot = &t.slots[pos]
        if slot.row < 0:
            return NULL
        if slot.h == fh:
            e = _entry(t, slot.row)
            key = _key(e)
            j = 0
            while j < k and key[j] == ids[start + j]:
                j += 1
            if j == k:
                return e
        pos = (pos + 1) & t.mask


# Character classes matching the ``re`` module on str patterns:
# \w is alphanumeric or underscore, \s is Unicode whitespace.
cdef enum:
    C_SPACE = 0
    C_WORD = 1
    C_OTHER = 2

cdef unsigned char ASCII_CLASS[128]
for _c in range(128):
    ASCII_CLASS[_c] = C_SPACE if chr(_c).isspace() else (C_WORD if (chr(_c).isalnum() or _c == 95) else C_OTHER)


cdef inline unsigned char _char_class(Py_UCS4 ch) noexcept:
    if ch < 128:
        return ASCII_CLASS[ch]
    if Py_UNICODE_ISALNUM(ch):
        return C_WORD
    if Py_UNICODE_ISSPACE(ch):
        return C_SPACE
    return C_OTHER


cdef inline uint64_t _hash_cps(const Py_UCS4* cps, Py_ssize_t n) noexcept nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(n):
        h ^= <uint32_t>cps[i]
        h *= FNV_PRIME
    return _finish(h)


cdef class Scorer:
    """Backoff scorer over per-order hash tables keyed by token-id tuples."""

    cdef readonly int order
    cdef readonly dict vocab
    cdef int32_t bos, eos, unk
    cdef Table tables[MAX_ORDER]
    cdef int n_tables
    # word -> id over code points: open addressing into (offset, length) rows
    cdef uint64_t vmask
    cdef int64_t* vslots
    cdef Py_UCS4* vchars
    cdef int64_t* voffsets

    backend = "cython"

    def __cinit__(self):
        self.n_tables = 0
        self.vslots = NULL
        self.vchars = NULL
        self.voffsets = NULL

    def __init__(self, int order, tables):
        if order < 1 or order > MAX_ORDER:
            raise ValueError(f"order must be in [1, {MAX_ORDER}]")
        self.order = order
        vocab = {}
        for g in tables[0]:
            vocab[g[0]] = len(vocab)
        for s in ("<s>", "</s>", "<unk>"):
            if s not in vocab:
                vocab[s] = len(vocab)
        self.vocab = vocab
        self.bos = vocab["<s>"]
        self.eos = vocab["</s>"]
        self.unk = vocab["<unk>"]
        self._build_vocab()
        cdef int k
        for k in range(1, order + 1):
            self._build(k, tables[k - 1])
            self.n_tables = k

    cdef _build(self, int k, table):
        cdef Table* t = &self.tables[k - 1]
        cdef int64_t n = len(table)
        cdef uint64_t cap = 16
        while cap < <uint64_t>(2 * n + 1):
            cap <<= 1
        t.k = k
        t.n = n
        t.mask = cap - 1
        t.stride = (sizeof(Entry) + k * sizeof(int32_t) + 7) & ~7
        t.slots = <Slot*>malloc(cap * sizeof(Slot))
        t.entries = <char*>malloc((n + 1) * t.stride)
        if not t.slots or not t.entries:
            raise MemoryError()
        cdef uint64_t i
        for i in range(cap):
            t.slots[i].row = -1
        cdef int64_t row = 0
        cdef int j
        cdef uint64_t h, pos
        cdef Entry* e
        cdef int32_t* key
        vocab = self.vocab
        for gram, (lp, bo) in table.items():
            e = _entry(t, row)
            key = _key(e)
            for j in range(k):
                w = gram[j]
                if w not in vocab:
                    raise ValueError(f"{k}-gram {' '.join(gram)!r} uses a word missing from the unigrams")
                key[j] = vocab[w]
            e.logp = lp
            e.bow = bo
            h = FNV_OFFSET
            for j in range(k - 1, -1, -1):
                h = _step(h, key[j])
            if _find(t, key, 0, h) != NULL:
                raise ValueError(f"duplicate {k}-gram {' '.join(gram)!r}")
            h = _finish(h)
            pos = h & t.mask
            while t.slots[pos].row >= 0:
                pos = (pos + 1) & t.mask
            t.slots[pos].h = h
            t.slots[pos].row = row
            row += 1

    cdef _build_vocab(self):
        words = list(self.vocab)
        cdef Py_ssize_t nw = len(words), total = sum(len(w) for w in words)
        cdef uint64_t cap = 16
        while cap < <uint64_t>(2 * nw + 1):
            cap <<= 1
        self.vmask = cap - 1
        self.vslots = <int64_t*>malloc(cap * sizeof(int64_t))
        self.vchars = <Py_UCS4*>malloc((total + 1) * sizeof(Py_UCS4))
        self.voffsets = <int64_t*>malloc((nw + 1) * sizeof(int64_t))
        if not self.vslots or not self.vchars or not self.voffsets:
            raise MemoryError()
        cdef uint64_t i, pos
        for i in range(cap):
            self.vslots[i] = -1
        cdef Py_ssize_t off = 0, wid
        cdef Py_UCS4 ch
        for wid in range(nw):
            self.voffsets[wid] = off
            for ch in <str>words[wid]:
                self.vchars[off] = ch
                off += 1
            pos = _hash_cps(self.vchars + self.voffsets[wid], off - self.voffsets[wid]) & self.vmask
            while self.vslots[pos] >= 0:
                pos = (pos + 1) & self.vmask
            self.vslots[pos] = wid
        self.voffsets[nw] = off

    cdef inline int32_t _word_id(self, const Py_UCS4* cps, Py_ssize_t n) noexcept nogil:
        cdef uint64_t pos = _hash_cps(cps, n) & self.vmask
        cdef int64_t wid, start
        cdef Py_ssize_t j
        while True:
            wid = self.vslots[pos]
            if wid < 0:
                return self.unk
            start = self.voffsets[wid]
            if self.voffsets[wid + 1] - start == n:
                j = 0
                while j < n and self.vchars[start + j] == cps[j]:
                    j += 1
                if j == n:
                    return <int32_t>wid
            pos = (pos + 1) & self.vmask

    def __dealloc__(self):
        cdef int k
        free(self.vslots)
        free(self.vchars)
        free(self.voffsets)
        for k in range(self.n_tables):
            free(self.tables[k].slots)
            free(self.tables[k].entries)

    cdef double _score_ids(self, const int32_t* ids, int64_t length) noexcept nogil:
        """Sum of log10 p(ids[i] | preceding ids) for i >= 1.

        The n-grams found while matching position i are exactly the
        contexts that exist for position i + 1, so their backoff weights
        are kept in ``ctx_bo`` instead of being looked up again.
        """
        cdef double total = 0.0, lp
        cdef double ctx_bo[MAX_ORDER + 1]
        cdef double found_bo[MAX_ORDER + 1]
        cdef int64_t i
        cdef Entry* e
        cdef int n, j, matched, maxctx, n_ctx = 0
        cdef uint64_t h
        # position 0 is <s>; its unigram is the only context of length 1
        h = _step(FNV_OFFSET, ids[0])
        e = _find(&self.tables[0], ids, 0, h)
        if e != NULL:
            ctx_bo[1] = e.bow
            n_ctx = 1
        for i in range(1, length):
            maxctx = <int>i
            if maxctx > self.order - 1:
                maxctx = self.order - 1
            # longest stored n-gram ending at i
            h = _step(FNV_OFFSET, ids[i])
            e = _find(&self.tables[0], ids, i, h)
            lp = e.logp
            found_bo[1] = e.bow
            matched = 1
            for n in range(2, maxctx + 2):
                h = _step(h, ids[i - n + 1])
                e = _find(&self.tables[n - 1], ids, i - n + 1, h)
                if e == NULL:
                    break
                lp = e.logp
                found_bo[n] = e.bow
                matched = n
            # backoff weights of the longer contexts that did not match
            j = matched
            while j <= maxctx and j <= n_ctx:
                lp += ctx_bo[j]
                j += 1
            total += lp
            n_ctx = matched
            for j in range(1, matched + 1):
                ctx_bo[j] = found_bo[j]
        return total

    def score(self, tokens):
        """Return ``(log10 sum, predicted token count)`` for one token sequence."""
        cdef Py_ssize_t n = len(tokens), i
        cdef int32_t* ids = <int32_t*>malloc((n + 2) * sizeof(int32_t))
        if not ids:
            raise MemoryError()
        cdef dict vocab = self.vocab
        cdef object unk = self.unk
        cdef double total
        try:
            ids[0] = self.bos
            for i in range(n):
                ids[i + 1] = vocab.get(tokens[i], unk)
            ids[n + 1] = self.eos
            with nogil:
                total = self._score_ids(ids, n + 2)
        finally:
            free(ids)
        return total, n + 1

    def score_text(self, str text):
        """Score raw text: lowercase, split into word runs and punctuation
        runs, map to ids and score, without building token strings."""
        cdef str lowered = text.lower()
        cdef Py_ssize_t n = len(lowered), i = 0, m = 0, start
        cdef Py_UCS4* cps = <Py_UCS4*>malloc((n + 1) * sizeof(Py_UCS4))
        cdef unsigned char* cls = <unsigned char*>malloc(n + 1)
        cdef int32_t* ids = <int32_t*>malloc((n + 2) * sizeof(int32_t))
        cdef Py_UCS4 ch
        cdef unsigned char c
        cdef double total
        if not cps or not cls or not ids:
            free(cps)
            free(cls)
            free(ids)
            raise MemoryError()
        try:
            for ch in lowered:
                cps[i] = ch
                cls[i] = _char_class(ch)
                i += 1
            with nogil:
                ids[0] = self.bos
                m = 1
                i = 0
                while i < n:
                    c = cls[i]
                    if c == C_SPACE:
                        i += 1
                        continue
                    start = i
                    while i < n and cls[i] == c:
                        i += 1
                    ids[m] = self._word_id(cps + start, i - start)
                    m += 1
                ids[m] = self.eos
                total = self._score_ids(ids, m + 1)
        finally:
            free(cps)
            free(cls)
            free(ids)
        return total, m

    def score_many(self, docs):
        return [self.score(d) for d in docs]
