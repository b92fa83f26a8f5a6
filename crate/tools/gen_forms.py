#!/usr/bin/env python3
"""Generate weight-2 newform coefficient files for prime-square levels.

The offline corpus under data/forms/ was produced with this script. It works
only for levels N = p^2 and nebentypus primitive mod p^2:

  1. build weight-1 Eisenstein series E_1^{psi,phi}(q^t) of level dividing N;
  2. take all pairwise products whose character is the target chi;
  3. extract a basis of the span (this is M_2(N, chi) when the products span it);
  4. diagonalize T_2, T_3 on the span, drop the two Eisenstein eigenlines;
  5. write each cuspidal eigenform normalized by a_1 = 1, coefficients divided
     by sqrt(n) so that f(z) = y * sum a_n n^(1/2) e(nz).

The dimension of S_2(N, chi) from the Cohen-Oesterle formula is checked against
what the products produce; a mismatch aborts.

Usage: gen_forms.py --p 5 --k 4 16 --terms 6000 --out data/forms
       gen_forms.py --level11 --terms 3000 --out data/forms
"""

import argparse
import cmath
import hashlib
import math
import os
import sys

import numpy as np


def primitive_root(p, c):
    q = p ** c
    phi = q - q // p
    fac = [r for r in range(2, phi + 1) if phi % r == 0 and all(r % s for s in range(2, r))]
    for g in range(2, q):
        if math.gcd(g, p) != 1:
            continue
        if all(pow(g, phi // r, q) != 1 for r in fac):
            return g
    raise ValueError("no primitive root")


class Char:
    """Character mod p^e given by chi(g^j) = e(k j / phi(p^e)); e = 0 is trivial."""

    def __init__(self, p, e, k, g):
        self.p, self.e = p, e
        self.q = p ** e
        self.phi = self.q - self.q // p if e > 0 else 1
        self.k = k % self.phi
        self.dlog = {}
        if e > 0:
            x = 1
            for j in range(self.phi):
                self.dlog[x] = j
                x = x * g % self.q

    def __call__(self, n):
        if self.e == 0:
            return 1.0 + 0j
        n %= self.q
        if n % self.p == 0:
            return 0j
        return cmath.exp(2j * math.pi * self.k * self.dlog[n] / self.phi)

    def bernoulli1(self):
        return sum(self(a) * a for a in range(1, self.q + 1)) / self.q


def primitive_chars(p, e, g):
    if e == 0:
        return [Char(p, 0, 0, g)]
    phi = p ** e - p ** (e - 1)
    out = []
    for k in range(phi):
        if e == 1 and k == 0:
            continue
        if e >= 2 and k % p == 0:
            continue
        out.append(Char(p, e, k, g))
    return out


def eisenstein1(psi, phi, t, terms):
    c = np.zeros(terms + 1, dtype=complex)
    if psi.e == 0:
        c[0] += -phi.bernoulli1() / 2
    if phi.e == 0:
        c[0] += -psi.bernoulli1() / 2
    psiv = np.array([psi(m) for m in range(terms + 1)])
    phiv = np.array([phi(d) for d in range(terms + 1)])
    base = np.zeros(terms // t + 1, dtype=complex)
    base[0] = c[0]
    top = terms // t
    for d in range(1, top + 1):
        m = np.arange(1, top // d + 1)
        base[d * m] += psiv[m] * phiv[d]
    out = np.zeros(terms + 1, dtype=complex)
    out[:: t][: len(base)] = base
    return out


def dim_cusp(p, k):
    """Cohen-Oesterle for S_2(p^2, chi), chi primitive even of multiplier k."""
    N = p * p
    g = primitive_root(p, 2)
    chi = Char(p, 2, k, g)
    index = N + p
    e2 = sum(chi(x) for x in range(N) if (x * x + 1) % N == 0)
    e3 = sum(chi(x) for x in range(N) if (x * x + x + 1) % N == 0)
    d = index / 12 - 1 - e2.real / 4 - e3.real / 3
    return int(round(d))


def basis_indices(rows, tol=1e-9):
    picked = []
    q = []
    for i, r in enumerate(rows):
        v = r / np.linalg.norm(r)
        for b in q:
            v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv > tol:
            picked.append(i)
            q.append(v / nv)
    return picked


def hecke_matrix(basis, ell, chi_ell, probe):
    """Matrix of T_ell on span(basis) via least squares on coefficients 1..probe."""
    bmat = np.array([b[1 : probe + 1] for b in basis]).T
    cols = []
    for b in basis:
        tb = np.zeros(probe + 1, dtype=complex)
        for n in range(1, probe + 1):
            v = b[ell * n]
            if n % ell == 0:
                v += chi_ell * ell * b[n // ell]
            tb[n] = v
        sol, *_ = np.linalg.lstsq(bmat, tb[1:], rcond=None)
        resid = np.linalg.norm(bmat @ sol - tb[1:]) / max(1.0, np.linalg.norm(tb[1:]))
        if resid > 1e-8:
            raise RuntimeError(f"T_{ell} does not preserve the span (resid {resid:.2e})")
        cols.append(sol)
    return np.array(cols).T


def eigenforms(p, k, terms):
    N = p * p
    g = primitive_root(p, 2)
    chi = Char(p, 2, k, g)
    if k % p == 0 or abs(chi(-1) - 1) > 1e-9:
        raise ValueError("character must be primitive and even")
    target = chi(g)

    series = []
    for e_psi in range(3):
        for e_phi in range(3 - e_psi):
            for psi in primitive_chars(p, e_psi, g):
                for phi in primitive_chars(p, e_phi, g):
                    if not (psi.e or phi.e):
                        continue
                    val_m1 = psi(-1) * phi(-1)
                    if abs(val_m1 + 1) > 1e-9:
                        continue
                    level = p ** (e_psi + e_phi)
                    for t in [1, p, p * p]:
                        if level * t > N or N % (level * t):
                            continue
                        series.append((psi(g) * phi(g), (psi, phi, t)))

    probe = 400
    short = []
    specs = []
    cache = {}

    def e1(spec, n):
        key = (spec[0].e, spec[0].k, spec[1].e, spec[1].k, spec[2], n)
        if key not in cache:
            cache[key] = eisenstein1(spec[0], spec[1], spec[2], n)
        return cache[key]

    for i, (va, sa) in enumerate(series):
        for vb, sb in series[i:]:
            if abs(va * vb - target) > 1e-9:
                continue
            short.append(np.convolve(e1(sa, probe), e1(sb, probe))[: probe + 1])
            specs.append((sa, sb))
    idx = basis_indices([s[: probe // 2] for s in short])
    dim_m = len(idx)
    dim_s = dim_cusp(p, k)
    if dim_m != dim_s + 2:
        raise RuntimeError(f"products span {dim_m}, expected {dim_s + 2}")

    full = []
    for i in idx:
        sa, sb = specs[i]
        full.append(np.convolve(e1(sa, terms * 3), e1(sb, terms * 3))[: terms * 3 + 1])

    t2 = hecke_matrix([f for f in full], 2, chi(2), probe)
    t3 = hecke_matrix([f for f in full], 3, chi(3), probe)
    mix = t2 + math.pi * t3
    w, vecs = np.linalg.eig(mix)
    forms = []
    for j in range(len(w)):
        v = vecs[:, j]
        f = sum(v[i] * full[i] for i in range(len(full)))
        f = f / f[1]
        # E_2^{1,chi} and E_2^{chi,1}: a_l = 1 + chi(l) l and chi(l) + l
        if any(abs(f[2] - (u + 2 * v)) < 1e-6 and abs(f[3] - (w + 3 * x)) < 1e-6
               for (u, v, w, x) in [(1, chi(2), 1, chi(3)), (chi(2), 1, chi(3), 1)]):
            continue
        if abs(f[0]) > 1e-8:
            raise RuntimeError("eigenform with nonzero constant term not matching Eisenstein")
        forms.append(f[: terms + 1])
    if len(forms) != dim_s:
        raise RuntimeError(f"found {len(forms)} cusp eigenforms, expected {dim_s}")
    forms.sort(key=lambda f: (round(f[2].real, 8), round(f[2].imag, 8)))
    return g, chi, forms


def al_and_lvalue(p, b_coeffs, b_conj):
    N = p * p
    n = np.arange(1, len(b_coeffs))
    b = b_coeffs[1:]
    bc = b_conj[1:]
    sq = math.sqrt(N)

    def fcl(coeffs, y):
        return np.sum(coeffs * np.exp(-2 * math.pi * n * y))

    # -f(i/(t sqrt N))/t^2 = eps * f^c(i t / sqrt N)
    t = 1.1
    eps = -fcl(b, 1 / (t * sq)) / (t * t) / fcl(bc, t / sq)
    # Lambda(1) = int_1^inf f(it/sqrtN) dt + eps int_1^inf f^c(it/sqrtN) dt
    w = np.exp(-2 * math.pi * n / sq) * sq / (2 * math.pi * n)
    lam = np.sum(b * w) + eps * np.sum(bc * w)
    # Lambda(s) = N^(s/2) (2 pi)^(-s) Gamma(s) L(s); at s = 1
    lval = lam * 2 * math.pi / sq
    return eps, lval


def write_form(path, p, k, g, emb, a_norm, eps, lval, source):
    rows = []
    for n in range(1, len(a_norm)):
        z = a_norm[n]
        rows.append(f"{n} {z.real:.17e} {z.imag:.17e}\n")
    body = "".join(rows)
    digest = hashlib.sha256(body.encode()).hexdigest()
    header = [
        "#wlab-form v1",
        f"level: {p * p}",
        "weight: 2",
        f"char_p: {p}",
        "char_c: 2",
        f"char_generator: {g}",
        f"char_dlog_multiplier: {k}",
        f"embedding: {emb}",
        f"coefficients: {len(a_norm) - 1}",
        f"l_half: {lval.real:.12e} {lval.imag:.12e}",
        f"al_eigenvalue: {eps.real:.12e} {eps.imag:.12e}",
        f"source: {source}",
        f"checksum: sha256:{digest}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(header) + "\n" + body)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int)
    ap.add_argument("--k", type=int, nargs="+", default=[])
    ap.add_argument("--level11", action="store_true", help="write the level-11 eta-product form")
    ap.add_argument("--terms", type=int, default=4000)
    ap.add_argument("--out", default="data/forms")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    if args.level11:
        level11(args.terms, args.out)
        return
    p = args.p
    phi = p * (p - 1)
    for k in args.k:
        g, chi, forms = eigenforms(p, k, args.terms)
        _, _, conj = eigenforms(p, (-k) % phi, args.terms)
        for emb, f in enumerate(forms):
            # partner in S_2(N, chi-bar) has conjugate coefficients
            fc = np.conj(f)
            if not any(np.allclose(fc[:50], h[:50], atol=1e-8) for h in conj):
                raise RuntimeError("conjugate form missing from chi-bar space")
            eps, lval = al_and_lvalue(p, f, fc)
            n = np.arange(len(f))
            a_norm = np.zeros_like(f)
            a_norm[1:] = f[1:] / np.sqrt(n[1:])
            name = f"{p * p}.2.k{k}.{chr(ord('a') + emb)}.form"
            write_form(os.path.join(args.out, name), p, k, g, emb, a_norm, eps, lval,
                       "weight-1 Eisenstein products, T2/T3 eigenspaces")
            print(f"{name}: a2={f[2]:.6f} |eps|={abs(eps):.12f} L(1/2)={lval:.8f}", file=sys.stderr)




def level11(terms, out):
    """The trivial-character newform of level 11, q prod (1-q^n)^2 (1-q^(11n))^2."""
    poly = np.zeros(terms + 1)
    poly[0] = 1.0
    for n in range(1, terms + 1):
        for step, times in ((n, 2), (11 * n, 2)):
            if step > terms:
                continue
            for _ in range(times):
                poly[step:] = poly[step:] - poly[: terms + 1 - step]
    b = np.zeros(terms + 1, dtype=complex)
    b[1:] = poly[:terms]
    n = np.arange(terms + 1)
    a_norm = np.zeros_like(b)
    a_norm[1:] = b[1:] / np.sqrt(n[1:])
    rows = "".join(f"{m} {a_norm[m].real:.17e} {a_norm[m].imag:.17e}\n" for m in range(1, terms + 1))
    digest = hashlib.sha256(rows.encode()).hexdigest()
    header = [
        "#wlab-form v1",
        "level: 11",
        "weight: 2",
        "char_p: 11",
        "char_c: 1",
        "char_generator: 2",
        "char_dlog_multiplier: 0",
        "embedding: 0",
        f"coefficients: {terms}",
        "source: eta product eta(z)^2 eta(11z)^2",
        f"checksum: sha256:{digest}",
    ]
    with open(os.path.join(out, "11.2.k0.a.form"), "w") as fh:
        fh.write("\n".join(header) + "\n" + rows)


if __name__ == "__main__":
    main()
