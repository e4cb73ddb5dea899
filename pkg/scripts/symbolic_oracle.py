"""Symbolic reference values used to freeze test expectations.

Run once with ``python scripts/symbolic_oracle.py``; the printed tables are
pasted into tests/frozen.py.  Not imported by the package.
"""
import sympy as sp


def christoffel(M, q):
    n = len(q)
    Minv = M.inv()
    G = [[[sp.simplify(sum(Minv[j, l] * (sp.diff(M[l, k], q[i]) + sp.diff(M[l, i], q[k])
                                        - sp.diff(M[i, k], q[l])) for l in range(n)) / 2)
           for k in range(n)] for i in range(n)] for j in range(n)]
    return G


def riemann(G, q):
    # R^j_{ikl} = d_l G^j_{ik} - d_k G^j_{il} + G^p_{ik} G^j_{pl} - G^p_{il} G^j_{pk}
    n = len(q)
    R = [[[[sp.simplify(sp.diff(G[j][i][k], q[l]) - sp.diff(G[j][i][l], q[k])
                        + sum(G[p][i][k] * G[j][p][l] - G[p][i][l] * G[j][p][k] for p in range(n)))
            for l in range(n)] for k in range(n)] for i in range(n)] for j in range(n)]
    return R


def sphere():
    q1, q2 = sp.symbols("q1 q2")
    q = [q1, q2]
    M = sp.Matrix([[1, 0], [0, sp.sin(q1) ** 2]])
    G = christoffel(M, q)
    R = riemann(G, q)
    at = {q1: sp.pi / 4, q2: sp.Rational(3, 10)}
    print("sphere Gamma at q1=pi/4:")
    for j in range(2):
        for i in range(2):
            for k in range(2):
                v = G[j][i][k].subs(at)
                if v != 0:
                    print(f"  G[{j},{i},{k}] = {sp.nsimplify(v)} = {float(v):.17g}")
    print("sphere Riemann (symbolic):")
    for j in range(2):
        for i in range(2):
            for k in range(2):
                for l in range(2):
                    if R[j][i][k][l] != 0:
                        print(f"  R[{j},{i},{k},{l}] = {R[j][i][k][l]} -> {float(R[j][i][k][l].subs(at)):.17g}")
    # lowered R_{abcd} = M_{ap} R^p_{bcd}; sectional R_{0101}/det M
    low = sum(M[0, p] * R[p][1][0][1] for p in range(2))
    print("R_{1212}/det M =", sp.simplify(low / M.det()))
    # curvature force at q1=pi/4, zeta=(1,0), xi=(0,1): (R.xi)_j = R^i_{klj} z^k z^l xi_i
    z = [1, 0]
    xi = [0, 1]
    f = [sp.simplify(sum(R[i][k][l][j].subs(at) * z[k] * z[l] * xi[i]
                         for i in range(2) for k in range(2) for l in range(2))) for j in range(2)]
    print("curvature_force(zeta=(1,0), xi=(0,1)) =", f, [float(v) for v in f])
    z = [sp.Rational(3, 10), sp.Rational(-7, 10)]
    xi = [sp.Rational(1, 2), 2]
    f = [sp.simplify(sum(R[i][k][l][j].subs(at) * z[k] * z[l] * xi[i]
                         for i in range(2) for k in range(2) for l in range(2))) for j in range(2)]
    print("curvature_force(zeta=(0.3,-0.7), xi=(0.5,2)) =", [float(v) for v in f])


def double_pendulum():
    q1, q2, m1, m2, l1, l2, g = sp.symbols("q1 q2 m1 m2 l1 l2 g")
    t = sp.symbols("t")
    a = sp.Function("a")(t)
    b = sp.Function("b")(t)
    x1, y1 = l1 * sp.sin(a), -l1 * sp.cos(a)
    x2, y2 = x1 + l2 * sp.sin(a + b), y1 - l2 * sp.cos(a + b)
    K = (m1 * (sp.diff(x1, t) ** 2 + sp.diff(y1, t) ** 2)
         + m2 * (sp.diff(x2, t) ** 2 + sp.diff(y2, t) ** 2)) / 2
    V = m1 * g * y1 + m2 * g * y2
    da, db = sp.symbols("da db")
    K = sp.expand(K.subs({sp.diff(a, t): da, sp.diff(b, t): db}))
    M = sp.Matrix([[sp.diff(K, da, 2), sp.diff(K, da, db)], [sp.diff(K, da, db), sp.diff(K, db, 2)]])
    M = M.applyfunc(sp.simplify).subs({a: q1, b: q2})
    V = sp.simplify(V.subs({a: q1, b: q2}))
    print("double pendulum M =", M)
    print("double pendulum V =", V)
    unit = {m1: 1, m2: 1, l1: 1, l2: 1, g: sp.Rational(981, 100)}
    for pt in [(0, 0), (sp.Rational(3, 10), sp.Rational(7, 10))]:
        s = dict(unit)
        s.update({q1: pt[0], q2: pt[1]})
        Mv = M.subs(s)
        print(f" at q={pt}: M = {[[float(v) for v in row] for row in Mv.tolist()]}, V = {float(V.subs(s)):.17g}")
        # energy with zeta=(0.5,-1)
        z = sp.Matrix([sp.Rational(1, 2), -1])
        E = (z.T * Mv * z)[0] / 2 + V.subs(s)
        print(f"   energy(zeta=(0.5,-1)) = {float(E):.17g}")
    qs = [q1, q2]
    G = christoffel(M, qs)
    R = riemann(G, qs)
    low = sp.simplify(sum(M[0, p] * R[p][1][0][1] for p in range(2)) / M.det())
    print("double pendulum R_{1212}/det M =", low)
    s = dict(unit)
    s.update({q1: sp.Rational(3, 10), q2: sp.Rational(7, 10)})
    print("  at (0.3,0.7):", float(low.subs(s)))
    for j in range(2):
        for i in range(2):
            for k in range(2):
                for l in range(2):
                    v = R[j][i][k][l].subs(s)
                    if v != 0:
                        print(f"  R[{j},{i},{k},{l}] = {float(v):.17g}")


if __name__ == "__main__":
    sphere()
    double_pendulum()
