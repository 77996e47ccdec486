"""Independent 50-digit evaluation of the closed forms used as frozen test values."""
from mpmath import mp, mpf, sqrt, exp, log, pi, nint

mp.dps = 50

ETA_D, P_D, ALPHA, F_E, E_D = mpf("0.55"), mpf("1e-8"), mpf("0.165"), mpf("1.15"), mpf("0.02")


def h(x):
    if x == 0 or x == 1:
        return mpf(0)
    return -x * log(x, 2) - (1 - x) * log(1 - x, 2)


def eta(length):
    return ETA_D * mpf(10) ** (-ALPHA * length / 10)


def click(d, pd=P_D):
    return 1 - (1 - pd) * exp(-d)


def gain_qber(q1, q2, ed=E_D):
    q = q1 * (1 - q2) + q2 * (1 - q1) + q1 * q2
    eq = ed * q1 * (1 - q2) + (1 - ed) * q2 * (1 - q1) + q1 * q2 / 2
    return q, eq / q


def point(la, lb, ma, mb):
    a = sqrt(ma * eta(la)) / 2
    b = sqrt(mb * eta(lb)) / 2
    return gain_qber(click((a + b) ** 2), click((a - b) ** 2))


def gamma(n, k, lam, eps):
    n, k = mpf(n), mpf(k)
    lam = max(lam, 1 / (2 * k))
    a = max(n, k)
    g = (n + k) / (n * k) * log((n + k) / (2 * pi * n * k * lam * (1 - lam) * eps**2))
    num = (1 - 2 * lam) * a * g / (n + k) + sqrt(a**2 * g**2 / (n + k) ** 2 + 4 * lam * (1 - lam) * g)
    return num / (2 + 2 * a**2 * g / (n + k) ** 2)


def serfling(n, k, eps):
    n, k = mpf(n), mpf(k)
    return sqrt((n + k) * (k + 1) * log(1 / eps) / (2 * n * k**2))


def pco(e):
    return 1 - e**2 - (1 - 6 * e) ** 2 / 2


def show(name, v):
    print(f"{name} = {mp.nstr(v, 20)}")


show("transmittance(100)", eta(100))
show("q1(0.0225)", click(mpf("0.0225")))
show("q2(0.0025)", click(mpf("0.0025")))
q, e = gain_qber(mpf("0.0222489"), mpf("0.0024969"))
show("gain(0.0222489,0.0024969).q", q)
show("gain(0.0222489,0.0024969).e", e)
q, e = point(50, 50, mpf("0.05"), mpf("0.05"))
show("point50.q", q)
show("point50.e", e)
show("h(0.11)", h(mpf("0.11")))
for args in [(10**6, 10**5, mpf("0.02")), (10**4, 10**4, mpf("0.1"))]:
    show(f"gamma{args[:2]}", gamma(*args, mpf("1e-10")))
    show(f"serfling{args[:2]}", serfling(args[0], args[1], mpf("1e-10")))

# finite-key regression point
eps = mpf("1e-10")
N = mpf(10) ** 12
nmu = N * q
k = nint(nmu / 10)
eu = e + gamma(nmu - k, k, e, eps)
p = pco(eu)
mu_max = mpf("0.05")
pen_s = 7 / N * sqrt(nmu * log(2 / eps, 2))
pen_ec = log(2 / eps, 2) / N
pen_pa = 2 / N * log(1 / eps, 2)
core = q * (-(1 - 2 * mu_max) * log(p, 2) - F_E * h(e))
show("rate.k", k)
show("rate.e_upper", eu)
show("rate.p_co", p)
show("rate.pen_smooth", pen_s)
show("rate.pen_ec", pen_ec)
show("rate.pen_pa", pen_pa)
show("rate.rate", core - pen_s - pen_ec - pen_pa)
show("asym.rate", q * (-(1 - 2 * mu_max) * log(pco(e), 2) - F_E * h(e)))
show("leak_ext", mpf("0.05") * (1 - eta(50)) * 2)
