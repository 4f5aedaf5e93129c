"""High-precision reference values, independent of the package.

Posterior expectations are integrated over log(gamma) with mpmath's
tanh-sinh rule at 30 digits, using the unnormalized prior densities
written out afresh here. The frozen constants in the test modules were
produced by ``python tests/oracle.py``; ``test_oracle_regeneration``
re-derives a subset to keep both routes alive.
"""
import mpmath as mp

mp.mp.dps = 30

PRIOR_LOGPDF = {
    "de": lambda g, b=1.0: -b * g,
    "horseshoe": lambda g: -mp.log(g) / 2 - mp.log1p(g),
    "student-t": lambda g, a=1.0: -(a + 1) * mp.log(g) - a / g,
    "tpbn": lambda g, u=0.5, a=0.5: (u - 1) * mp.log(g) - (a + u) * mp.log1p(g),
}


def _moments(logpdf, n, tau, beta_hat, sigma2, weights, cuts=()):
    n, tau, bh, s2 = mp.mpf(n), mp.mpf(tau), mp.mpf(beta_hat), mp.mpf(sigma2)
    kappa = n * bh ** 2 / (2 * s2)
    c = mp.log(n * tau)

    def base(v):  # v = log(gamma)
        g = mp.exp(v)
        x = n * tau * g
        s = 1 / (1 + x)
        return logpdf(g) + v - mp.log1p(x) / 2 - kappa * s, s

    # the slowest tail (gamma^0.1 as gamma -> 0 for u = 0.1) needs a wide window;
    # beyond it the integrand is below 1e-20 of its peak
    lo, hi = -c - 500, -c + 120
    peaks = [-c, mp.mpf(0)]
    if kappa > 0.5:
        peaks.append(mp.log(2 * kappa - 1) - c)
        hi = max(hi, peaks[-1] + 120)
    pts = [lo + k * (hi - lo) / 155 for k in range(156)]
    pts += [q + d for q in peaks for d in (-1, -0.1, 0, 0.1, 1)]
    pts += list(cuts)
    pts = sorted(set(pts))
    shift = max(base(v)[0] for v in pts)
    out = []
    for w in weights:
        f = lambda v, w=w: (lambda lv_s: mp.exp(lv_s[0] - shift) * w(lv_s[1]))(base(v))
        out.append(mp.quad(f, pts))
    return out


def expected_shrinkage(prior, n, tau, beta_hat, sigma2=1.0, **params):
    logpdf = lambda g: PRIOR_LOGPDF[prior](g, **params)
    den, num = _moments(logpdf, n, tau, beta_hat, sigma2, [lambda s: 1, lambda s: s])
    return num / den


def expected_complement(prior, n, tau, beta_hat, sigma2=1.0, **params):
    logpdf = lambda g: PRIOR_LOGPDF[prior](g, **params)
    den, num = _moments(logpdf, n, tau, beta_hat, sigma2, [lambda s: 1, lambda s: 1 - s])
    return num / den


def exceedance(prior, n, tau, beta_hat, eta, sigma2=1.0, **params):
    logpdf = lambda g: PRIOR_LOGPDF[prior](g, **params)
    eta = mp.mpf(eta)
    den, num = _moments(logpdf, n, tau, beta_hat, sigma2,
                        [lambda s: 1, lambda s: 1 if s > eta else 0],
                        cuts=[mp.log(1 / eta - 1) - mp.log(mp.mpf(n) * tau)])
    return num / den


def ig_cdf(x, mu, lam):
    mu, lam = mp.mpf(mu), mp.mpf(lam)

    def pdf(t):
        norm = mp.sqrt(lam / (2 * mp.pi * t ** 3))
        return norm * mp.exp(-lam * (t - mu) ** 2 / (2 * mu ** 2 * t))

    return mp.quad(pdf, [0, min(mp.mpf(x), mu), x])


def gig_mean(p, a, b):
    w = mp.sqrt(mp.mpf(a) * b)
    return mp.sqrt(mp.mpf(b) / a) * mp.besselk(p + 1, w) / mp.besselk(p, w)


if __name__ == "__main__":
    print("DE E(s) n=100, sigma2=1")
    for tau in ("1e-5", "1e-3", "1e-1"):
        for bh in ("0.5", "2"):
            print(tau, bh, mp.nstr(expected_shrinkage("de", 100, mp.mpf(tau), mp.mpf(bh)), 20))
    print("DE n=200 tau=1e-3 bh=2", mp.nstr(expected_shrinkage("de", 200, mp.mpf("1e-3"), 2), 20))
    hs = expected_shrinkage("horseshoe", 100, mp.mpf("1e-4"), 0)
    print("HS n=100 tau=1e-4 bh=0", mp.nstr(hs, 20))
    print("HS n=1e4 tau=1e-20 bh=0 E(1-s)",
          mp.nstr(expected_complement("horseshoe", 10 ** 4, mp.mpf("1e-20"), 0), 20))
    print("HS n=100 tau=1e-4 bh=0.5 P(s>0.5)",
          mp.nstr(exceedance("horseshoe", 100, mp.mpf("1e-4"), mp.mpf("0.5"), mp.mpf("0.5")), 20))
    print("TPBN(0.1,0.5) n=50 tau=1e-2 bh=1.5", mp.nstr(
        expected_shrinkage("tpbn", 50, mp.mpf("1e-2"), mp.mpf("1.5"), u=mp.mpf("0.1"), a=0.5), 20))
    print("StudentT(1) n=1000 tau=1e-3 bh=0.1", mp.nstr(
        expected_shrinkage("student-t", 1000, mp.mpf("1e-3"), mp.mpf("0.1")), 20))
    print("IG cdf(1;1,1)", mp.nstr(ig_cdf(1, 1, 1), 20))
    print("IG cdf(0.5;2,3)", mp.nstr(ig_cdf(mp.mpf("0.5"), 2, 3), 20))
    print("GIG mean(-0.5, 2, 3)", mp.nstr(gig_mean(mp.mpf("-0.5"), 2, 3), 20))
    print("GIG mean(0.1, 0.5, 4)", mp.nstr(gig_mean(mp.mpf("0.1"), mp.mpf("0.5"), 4), 20))
