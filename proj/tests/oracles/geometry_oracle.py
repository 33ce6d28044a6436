"""Independent reference values for the geometry tests (sympy / mpmath)."""
import mpmath as mp
import sympy as sp

mp.mp.dps = 30

# oblate spheroid a = 1.2, c = 0.8: area by direct quadrature of the surface element
a, c = mp.mpf("1.2"), mp.mpf("0.8")
area = mp.quad(lambda t: 2 * mp.pi * a * mp.sin(t) * mp.sqrt((a * mp.cos(t)) ** 2 + (c * mp.sin(t)) ** 2), [0, mp.pi])
e = mp.sqrt(1 - c**2 / a**2)
closed = 2 * mp.pi * a**2 * (1 + (1 - e**2) / e * mp.atanh(e))
print("spheroid_area", mp.nstr(area, 20), mp.nstr(closed, 20))

# torus R = 1, r = 0.4, shape operator W = -grad_Gamma n from the outward normal
t, p = sp.symbols("t p", real=True)
R, r = sp.Rational(1), sp.Rational(2, 5)
X = sp.Matrix([(R + r * sp.cos(t)) * sp.cos(p), (R + r * sp.cos(t)) * sp.sin(p), r * sp.sin(t)])
n = sp.Matrix([sp.cos(t) * sp.cos(p), sp.cos(t) * sp.sin(p), sp.sin(t)])
Xt, Xp = X.diff(t), X.diff(p)
G = sp.Matrix([[Xt.dot(Xt), Xt.dot(Xp)], [Xp.dot(Xt), Xp.dot(Xp)]])
h = sp.Matrix([[X.diff(t, 2).dot(n), X.diff(t, p).dot(n)], [X.diff(p, t).dot(n), X.diff(p, 2).dot(n)]])
S = sp.simplify(G.inv() * h)
for tv in [0.3, 1.2, 2.5]:
    ev = sorted(float(v) for v in S.subs({t: tv, p: 0.7}).eigenvals().keys())
    print("torus_kappa", tv, ev, "K", ev[0] * ev[1])

# sphere: div_Gamma grad_Gamma y3 = -2 y3 (degree one harmonic), grad_Gamma y3 = e3 - y3 y
th, ph = sp.symbols("theta phi", positive=True)
Y = sp.cos(th)
lap = sp.simplify(1 / sp.sin(th) * sp.diff(sp.sin(th) * sp.diff(Y, th), th))
print("sphere_lap_y3_over_y3", sp.simplify(lap / Y))
