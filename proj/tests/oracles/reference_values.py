"""Independent high-precision reference values for the C++ tests.

Everything is recomputed from the golden-rule rates with mpmath at 40 digits;
nothing here imports the C++ code. Run:  python3 reference_values.py
"""
import mpmath as mp

mp.mp.dps = 40


def fermi(e, mu, t):
    return 1 / (mp.exp((mp.mpf(e) - mu) / t) + 1)


def rates(x=0.9, tw=5, th=15, ew=0, eh=0, dmu=mp.mpf(1) / 4, u=5, gh=1):
    g = {("L", 0): 1, ("L", 1): 1, ("R", 0): 1, ("R", 1): 1 - mp.mpf(x), ("H", 0): gh, ("H", 1): gh}
    wp, wm = {}, {}
    for n in (0, 1):
        for a, mu in (("L", dmu), ("R", 0)):
            f = fermi(ew + u * n, mu, tw)
            wp[a, n], wm[a, n] = g[a, n] * f, g[a, n] * (1 - f)
        f = fermi(eh + u * n, 0, th)
        wp["H", n], wm["H", n] = gh * f, gh * (1 - f)
    for n in (0, 1):
        wp["W", n] = wp["L", n] + wp["R", n]
        wm["W", n] = wm["L", n] + wm["R", n]
    return wp, wm


def generator(wp, wm):
    w = mp.zeros(4, 4)
    w[1, 0], w[0, 1] = wp["H", 0], wm["H", 0]
    w[2, 0], w[0, 2] = wp["W", 0], wm["W", 0]
    w[3, 1], w[1, 3] = wp["W", 1], wm["W", 1]
    w[3, 2], w[2, 3] = wp["H", 1], wm["H", 1]
    for j in range(4):
        w[j, j] = -sum(w[i, j] for i in range(4) if i != j)
    return w


def steady(w):
    # Replace one balance equation by normalization.
    a = w.copy()
    for j in range(4):
        a[3, j] = 1
    return mp.lu_solve(a, mp.matrix([0, 0, 0, 1]))


def currents(dmu=mp.mpf(1) / 4, u=5, eh=0, **k):
    wp, wm = rates(dmu=dmu, u=u, eh=eh, **k)
    p = steady(generator(wp, wm))
    il = wm["L", 0] * p[2] + wm["L", 1] * p[3] - wp["L", 0] * p[0] - wp["L", 1] * p[1]
    jh = eh * (wp["H", 0] * p[0] - wm["H", 0] * p[1]) + (eh + u) * (wp["H", 1] * p[2] - wm["H", 1] * p[3])
    return p, il, jh


def cycle_balance(dmu, extended, tw=5, th=15, u=5):
    wp, wm = rates(dmu=dmu, tw=tw, th=th, u=u)
    bw, bh = mp.mpf(1) / tw, mp.mpf(1) / th
    p4 = wp["R", 0] * wp["H", 1] * wm["L", 1] * wm["H", 0]
    p1 = wp["L", 0] * wp["H", 1] * wm["R", 1] * wm["H", 0]
    p6 = wp["L", 0] * wm["R", 0]
    ps = wp["L", 1] * wm["R", 1]
    s6 = wm["H", 0] * wm["H", 1] + wm["W", 1] * wm["H", 0] + wp["W", 1] * wm["H", 1]
    ss = wp["H", 0] * wp["H", 1] + wm["W", 0] * wp["H", 0] + wp["W", 0] * wp["H", 1]
    rhs = (1 - mp.exp(-bw * dmu)) / (1 - mp.exp(bw * dmu - (bw - bh) * u))
    lhs = p4 / (p1 + p6 * s6 + ps * ss) if extended else p4 / (p6 * s6)
    return lhs - rhs


def c4_joint_density(tau):
    """Triple integral over 0 < t1 < t2 < t3 < tau of the path density."""
    wp, wm = rates()
    k00 = wp["H", 0] + wp["W", 0]
    k10 = wp["H", 1] + wm["W", 0]
    k11 = wm["H", 1] + wm["W", 1]
    k01 = wm["H", 0] + wp["W", 1]
    pre = wp["R", 0] * wp["H", 1] * wm["L", 1] * wm["H", 0]

    def inner(t1, t2, t3):
        return mp.exp(-t1 * k00 - (t2 - t1) * k10 - (t3 - t2) * k11 - (tau - t3) * k01)

    def over_t1(t2, t3):
        return mp.quad(lambda t1: inner(t1, t2, t3), [0, t2])

    def over_t2(t3):
        return mp.quad(lambda t2: over_t1(t2, t3), [0, t3])

    with mp.workdps(15):  # nested quadrature is slow at full precision
        return pre * mp.quad(over_t2, [0, tau])


if __name__ == "__main__":
    print("fermi(5, 0.25, 5) =", mp.nstr(fermi(5, mp.mpf(1) / 4, 5), 20))
    p, il, jh = currents()
    print("P* steady state  =", [mp.nstr(v, 20) for v in p])
    print("P* I_L, J_H      =", mp.nstr(il, 20), mp.nstr(jh, 20))
    _, il, jh = currents(th=10)
    print("LDF I_L, J_H/U   =", mp.nstr(il, 20), mp.nstr(jh / 5, 20))
    stall = mp.findroot(lambda d: currents(dmu=d)[1], (mp.mpf("0.3"), mp.mpf("1.0")), solver="anderson")
    print("stall bias       =", mp.nstr(stall, 20))
    two = mp.findroot(lambda d: cycle_balance(d, False), (mp.mpf("0.3"), mp.mpf("1.5")), solver="anderson")
    ext = mp.findroot(lambda d: cycle_balance(d, True), (mp.mpf("0.3"), mp.mpf("1.5")), solver="anderson")
    print("two-cycle est.   =", mp.nstr(two, 20))
    print("extended est.    =", mp.nstr(ext, 20))
    wp, wm = rates(th=100)
    gw0, gw1 = 2, 2 - mp.mpf("0.9")
    print("max q_in (T_H=100) =", mp.nstr(5 * (wp["W", 0] / gw0 - wp["W", 1] / gw1), 20))
    for tau in (1, 3, 8):
        print(f"C4 joint density at tau={tau} =", mp.nstr(c4_joint_density(tau), 15))
