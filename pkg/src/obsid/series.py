"""Truncated power series and matrix series over a prime field.

A series of order ``nu`` stores coefficients 0..nu (that is, it is known
mod t^(nu+1)) and all arithmetic is strict about matching orders.  Matrix
series are stored as a list of coefficient matrices, with an entrywise
view available for conversion in both directions.  Multiplication is
classical convolution; inversion uses Newton doubling.
"""

from __future__ import annotations

__all__ = [
    "TruncSeries",
    "SeriesMatrix",
    "SeriesRing",
    "solve_linear_ode",
    "fp_matrix_inverse",
]


class TruncSeries:
    __slots__ = ("coeffs", "p")

    def __init__(self, coeffs, p: int):
        self.coeffs = [c % p for c in coeffs]
        if not self.coeffs:
            raise ValueError("a series needs at least one coefficient")
        self.p = p

    @classmethod
    def constant(cls, c: int, ncoeffs: int, p: int):
        coeffs = [0] * ncoeffs
        coeffs[0] = c % p
        return cls(coeffs, p)

    @property
    def ncoeffs(self) -> int:
        return len(self.coeffs)

    @property
    def order(self) -> int:
        """Truncation order: the series is known mod t^(order+1)."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __eq__(self, other):
        return (isinstance(other, TruncSeries) and self.p == other.p
                and self.coeffs == other.coeffs)

    def __repr__(self):
        return f"TruncSeries({self.coeffs}, p={self.p})"

    def _match(self, other: "TruncSeries"):
        if self.p != other.p:
            raise ValueError("mixed moduli")
        if len(self.coeffs) != len(other.coeffs):
            raise ValueError(
                f"order mismatch: {len(self.coeffs)} vs {len(other.coeffs)} coefficients")

    def add(self, other: "TruncSeries") -> "TruncSeries":
        self._match(other)
        p = self.p
        return TruncSeries([(a + b) % p for a, b in zip(self.coeffs, other.coeffs)], p)

    def sub(self, other: "TruncSeries") -> "TruncSeries":
        self._match(other)
        p = self.p
        return TruncSeries([(a - b) % p for a, b in zip(self.coeffs, other.coeffs)], p)

    def neg(self) -> "TruncSeries":
        p = self.p
        return TruncSeries([(-a) % p for a in self.coeffs], p)

    def mul(self, other: "TruncSeries") -> "TruncSeries":
        self._match(other)
        a, b, p = self.coeffs, other.coeffs, self.p
        n = len(a)
        out = [0] * n
        for i in range(n):
            ai = a[i]
            if ai:
                for j in range(n - i):
                    bj = b[j]
                    if bj:
                        out[i + j] += ai * bj
        return TruncSeries([c % p for c in out], p)

    def scale(self, c: int) -> "TruncSeries":
        p = self.p
        c %= p
        return TruncSeries([(c * a) % p for a in self.coeffs], p)

    def invert(self) -> "TruncSeries":
        """Multiplicative inverse mod t^(order+1) by Newton doubling."""
        p = self.p
        a0 = self.coeffs[0]
        if a0 == 0:
            raise ZeroDivisionError("constant term is not invertible")
        n = len(self.coeffs)
        b = [pow(a0, p - 2, p)]
        prec = 1
        while prec < n:
            prec = min(2 * prec, n)
            a = self.coeffs[:prec]
            ab = _conv(a, b, prec, p)
            bab = _conv(b, ab, prec, p)
            b = [(2 * (b[k] if k < len(b) else 0) - bab[k]) % p for k in range(prec)]
        return TruncSeries(b, p)

    def derivative(self) -> "TruncSeries":
        p = self.p
        if len(self.coeffs) == 1:
            return TruncSeries([0], p)
        return TruncSeries(
            [(k * c) % p for k, c in enumerate(self.coeffs) if k > 0], p)

    def derivative_padded(self) -> "TruncSeries":
        """Derivative zero-padded back to the input length.

        The top coefficient is unknown after differentiation of a truncated
        series; callers relying on it must account for that.
        """
        p = self.p
        out = [(k * c) % p for k, c in enumerate(self.coeffs) if k > 0]
        out.append(0)
        return TruncSeries(out, p)

    def integrate(self) -> "TruncSeries":
        """Antiderivative with zero constant term, same truncation order."""
        p = self.p
        n = len(self.coeffs)
        if p <= n:
            raise ValueError("prime too small for integration at this order")
        out = [0] * n
        for k in range(n - 1):
            out[k + 1] = (self.coeffs[k] * pow(k + 1, p - 2, p)) % p
        return TruncSeries(out, p)

    def truncate(self, ncoeffs: int) -> "TruncSeries":
        if ncoeffs > len(self.coeffs):
            raise ValueError("cannot truncate upward")
        return TruncSeries(self.coeffs[:ncoeffs], self.p)

    def extend(self, ncoeffs: int) -> "TruncSeries":
        if ncoeffs < len(self.coeffs):
            raise ValueError("cannot extend downward")
        return TruncSeries(self.coeffs + [0] * (ncoeffs - len(self.coeffs)), self.p)


def _conv(a, b, n, p):
    out = [0] * n
    for i in range(min(len(a), n)):
        ai = a[i]
        if ai:
            top = min(len(b), n - i)
            for j in range(top):
                bj = b[j]
                if bj:
                    out[i + j] += ai * bj
    return [c % p for c in out]


class SeriesRing:
    """Ring adapter so SLP tapes evaluate directly over truncated series."""

    def __init__(self, p: int, ncoeffs: int):
        self.p = p
        self.ncoeffs = ncoeffs

    def from_int(self, c):
        return TruncSeries.constant(c, self.ncoeffs, self.p)

    @staticmethod
    def add(a, b):
        return a.add(b)

    @staticmethod
    def sub(a, b):
        return a.sub(b)

    @staticmethod
    def mul(a, b):
        return a.mul(b)

    @staticmethod
    def div(a, b):
        return a.mul(b.invert())


# --------------------------------------------------------------------------
# F_p dense linear algebra helpers
# --------------------------------------------------------------------------

def fp_matrix_inverse(mat, p: int):
    """Gauss-Jordan inverse of a square matrix over F_p; raises if singular."""
    n = len(mat)
    aug = [[mat[i][j] % p for j in range(n)] + [1 if j == i else 0 for j in range(n)]
           for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] % p), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix over F_p")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], p - 2, p)
        aug[col] = [(x * inv) % p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                row, prow = aug[r], aug[col]
                aug[r] = [(x - factor * y) % p for x, y in zip(row, prow)]
    return [row[n:] for row in aug]


def _mat_zero(rows, cols):
    return [[0] * cols for _ in range(rows)]


def _mat_add(a, b, p):
    return [[(x + y) % p for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _mat_mul_acc(acc, a, b):
    # acc += a @ b without reduction; caller reduces
    cols = len(b[0]) if b else 0
    for i, row in enumerate(a):
        acc_i = acc[i]
        for k, aik in enumerate(row):
            if aik:
                brow = b[k]
                for j in range(cols):
                    acc_i[j] += aik * brow[j]


class SeriesMatrix:
    """Matrix of truncated series, stored as a series of coefficient matrices."""

    __slots__ = ("rows", "cols", "p", "coeffs")

    def __init__(self, rows: int, cols: int, coeffs, p: int):
        self.rows = rows
        self.cols = cols
        self.p = p
        self.coeffs = coeffs  # list over t-power of rows x cols int matrices

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, rows, cols, ncoeffs, p):
        return cls(rows, cols, [_mat_zero(rows, cols) for _ in range(ncoeffs)], p)

    @classmethod
    def identity(cls, n, ncoeffs, p):
        m = cls.zero(n, n, ncoeffs, p)
        for i in range(n):
            m.coeffs[0][i][i] = 1 % p
        return m

    @classmethod
    def from_scalar_matrix(cls, mat, ncoeffs, p):
        rows = len(mat)
        cols = len(mat[0]) if rows else 0
        out = cls.zero(rows, cols, ncoeffs, p)
        for i in range(rows):
            for j in range(cols):
                out.coeffs[0][i][j] = mat[i][j] % p
        return out

    @classmethod
    def from_entries(cls, entries, p=None):
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        if p is None:
            p = entries[0][0].p
        ncoeffs = entries[0][0].ncoeffs if rows else 1
        out = cls.zero(rows, cols, ncoeffs, p)
        for i in range(rows):
            for j in range(cols):
                s = entries[i][j]
                if s.ncoeffs != ncoeffs:
                    raise ValueError("order mismatch among entries")
                for k, c in enumerate(s.coeffs):
                    out.coeffs[k][i][j] = c
        return out

    # -- views -------------------------------------------------------------

    @property
    def ncoeffs(self) -> int:
        return len(self.coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def entry(self, i, j) -> TruncSeries:
        return TruncSeries([ck[i][j] for ck in self.coeffs], self.p)

    def entries(self):
        return [[self.entry(i, j) for j in range(self.cols)] for i in range(self.rows)]

    def coefficient(self, k):
        return [row[:] for row in self.coeffs[k]]

    def __eq__(self, other):
        return (isinstance(other, SeriesMatrix) and self.p == other.p
                and self.rows == other.rows and self.cols == other.cols
                and self.coeffs == other.coeffs)

    def __repr__(self):
        return f"SeriesMatrix({self.rows}x{self.cols}, ncoeffs={self.ncoeffs})"

    def _match(self, other):
        if self.p != other.p:
            raise ValueError("mixed moduli")
        if self.ncoeffs != other.ncoeffs:
            raise ValueError("order mismatch")

    # -- arithmetic ----------------------------------------------------------

    def add(self, other):
        self._match(other)
        return SeriesMatrix(
            self.rows, self.cols,
            [_mat_add(a, b, self.p) for a, b in zip(self.coeffs, other.coeffs)],
            self.p)

    def sub(self, other):
        self._match(other)
        p = self.p
        return SeriesMatrix(
            self.rows, self.cols,
            [[[(x - y) % p for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]
             for a, b in zip(self.coeffs, other.coeffs)],
            self.p)

    def neg(self):
        p = self.p
        return SeriesMatrix(
            self.rows, self.cols,
            [[[(-x) % p for x in row] for row in ck] for ck in self.coeffs], p)

    def matmul(self, other):
        self._match(other)
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        p = self.p
        n = self.ncoeffs
        out = []
        for k in range(n):
            acc = _mat_zero(self.rows, other.cols)
            for i in range(k + 1):
                _mat_mul_acc(acc, self.coeffs[i], other.coeffs[k - i])
            out.append([[x % p for x in row] for row in acc])
        return SeriesMatrix(self.rows, other.cols, out, p)

    def is_diagonal(self) -> bool:
        return self.rows == self.cols and all(
            ck[i][j] == 0
            for ck in self.coeffs
            for i in range(self.rows)
            for j in range(self.cols)
            if i != j)

    def invert(self):
        """Two-sided inverse mod t^(order+1) by Newton doubling.

        Requires the constant-term matrix to be invertible over F_p; a
        diagonal matrix is inverted entrywise instead.
        """
        if self.rows != self.cols:
            raise ValueError("only square matrices have inverses")
        p = self.p
        n = self.ncoeffs
        if self.is_diagonal():
            out = SeriesMatrix.zero(self.rows, self.cols, n, p)
            for i in range(self.rows):
                inv = self.entry(i, i).invert()
                for k in range(n):
                    out.coeffs[k][i][i] = inv.coeffs[k]
            return out
        b0 = fp_matrix_inverse(self.coeffs[0], p)
        b = SeriesMatrix(self.rows, self.cols, [b0], p)
        prec = 1
        while prec < n:
            prec = min(2 * prec, n)
            a = SeriesMatrix(self.rows, self.cols, self.coeffs[:prec], p)
            be = SeriesMatrix(self.rows, self.cols,
                              b.coeffs + [_mat_zero(self.rows, self.cols)
                                          for _ in range(prec - b.ncoeffs)], p)
            bab = be.matmul(a).matmul(be)
            two_b = [[[(2 * x) % p for x in row] for row in ck] for ck in be.coeffs]
            b = SeriesMatrix(
                self.rows, self.cols,
                [[[(x - y) % p for x, y in zip(rx, ry)] for rx, ry in zip(cb, cc)]
                 for cb, cc in zip(two_b, bab.coeffs)],
                p)
        return b

    def derivative_padded(self):
        p = self.p
        out = [[[(k * x) % p for x in row] for row in ck]
               for k, ck in enumerate(self.coeffs) if k > 0]
        out.append(_mat_zero(self.rows, self.cols))
        return SeriesMatrix(self.rows, self.cols, out, p)

    def integrate(self):
        p = self.p
        n = self.ncoeffs
        if p <= n:
            raise ValueError("prime too small for integration at this order")
        out = [_mat_zero(self.rows, self.cols)]
        for k in range(n - 1):
            inv = pow(k + 1, p - 2, p)
            out.append([[(x * inv) % p for x in row] for row in self.coeffs[k]])
        return SeriesMatrix(self.rows, self.cols, out, p)

    def truncate(self, ncoeffs):
        if ncoeffs > self.ncoeffs:
            raise ValueError("cannot truncate upward")
        return SeriesMatrix(self.rows, self.cols,
                            [self.coefficient(k) for k in range(ncoeffs)], self.p)

    def extend(self, ncoeffs):
        if ncoeffs < self.ncoeffs:
            raise ValueError("cannot extend downward")
        coeffs = [self.coefficient(k) for k in range(self.ncoeffs)]
        coeffs += [_mat_zero(self.rows, self.cols)
                   for _ in range(ncoeffs - self.ncoeffs)]
        return SeriesMatrix(self.rows, self.cols, coeffs, self.p)

    def hstack(self, other):
        self._match(other)
        if self.rows != other.rows:
            raise ValueError("shape mismatch")
        coeffs = [[ra + rb for ra, rb in zip(a, b)]
                  for a, b in zip(self.coeffs, other.coeffs)]
        return SeriesMatrix(self.rows, self.cols + other.cols, coeffs, self.p)

    def slice_cols(self, start, stop):
        coeffs = [[row[start:stop] for row in ck] for ck in self.coeffs]
        return SeriesMatrix(self.rows, stop - start, coeffs, self.p)


def solve_linear_ode(M: SeriesMatrix, R, W0, ncoeffs: int) -> SeriesMatrix:
    """Series solution S of S' = M*S + R with S(0) = W0, to ncoeffs coefficients.

    The defining recurrence is (k+1) S_{k+1} = sum_{i+j=k} M_i S_j + R_k;
    M must carry at least ncoeffs-1 coefficients and R (when given) the same.
    W0 is a plain coefficient matrix.
    """
    p = M.p
    if p <= ncoeffs:
        raise ValueError("prime too small for integration at this order")
    n = M.rows
    cols = len(W0[0]) if W0 else 0
    if M.cols != n:
        raise ValueError("M must be square")
    S = [[[c % p for c in row] for row in W0]]
    for k in range(ncoeffs - 1):
        acc = _mat_zero(n, cols)
        for i in range(min(k, M.ncoeffs - 1) + 1):
            _mat_mul_acc(acc, M.coeffs[i], S[k - i])
        if R is not None and k < R.ncoeffs:
            rk = R.coeffs[k]
            for i in range(n):
                for j in range(cols):
                    acc[i][j] += rk[i][j]
        inv = pow(k + 1, p - 2, p)
        S.append([[(x * inv) % p for x in row] for row in acc])
    return SeriesMatrix(n, cols, S, p)
