# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled equicorrelated orthant kernel.

Same algorithm as ``_pykernels.orthant_equicorr``; the refinement loop
runs without the GIL.
"""

from libc.math cimport erfc, exp, sqrt, fabs, pow
from libc.stdlib cimport malloc, free

cdef double INV_SQRT_2PI = 0.398942280401432677939946059934
cdef double SQRT1_2 = 0.707106781186547524400844362104849

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]

XGK[:] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
]
WGK[:] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
WG[:] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
]

cdef enum:
    INIT_PANELS = 8
    NODES_PER_PANEL = 15


cdef inline double _integrand(double z, const double* vals, const double* mult,
                              Py_ssize_t m, double inv_sqrt_c, double sqrt_d) noexcept nogil:
    cdef double out = exp(-0.5 * z * z) * INV_SQRT_2PI
    cdef double t, cdf
    cdef Py_ssize_t j
    for j in range(m):
        t = (vals[j] - sqrt_d * z) * inv_sqrt_c
        cdf = 0.5 * erfc(-t * SQRT1_2)
        if mult[j] == 1.0:
            out *= cdf
        else:
            out *= pow(cdf, mult[j])
        if out == 0.0:
            break
    return out


cdef void _gk15(double lo, double hi, const double* vals, const double* mult,
                Py_ssize_t m, double inv_sqrt_c, double sqrt_d,
                double* res, double* err) noexcept nogil:
    cdef double centre = 0.5 * (lo + hi)
    cdef double half = 0.5 * (hi - lo)
    cdef double fc = _integrand(centre, vals, mult, m, inv_sqrt_c, sqrt_d)
    cdef double res_k = fc * WGK[7]
    cdef double res_g = fc * WG[3]
    cdef double f1, f2, dx
    cdef int j
    for j in range(7):
        dx = half * XGK[j]
        f1 = _integrand(centre - dx, vals, mult, m, inv_sqrt_c, sqrt_d)
        f2 = _integrand(centre + dx, vals, mult, m, inv_sqrt_c, sqrt_d)
        res_k += WGK[j] * (f1 + f2)
        if j % 2 == 1:
            res_g += WG[j // 2] * (f1 + f2)
    res[0] = res_k * half
    err[0] = fabs((res_k - res_g) * half)


def orthant_equicorr(const double[::1] vals, const double[::1] mult, double c, double d,
                     double halfwidth, double abs_tol, double rel_tol, long max_nodes):
    """See ``selbias._pykernels.orthant_equicorr``."""
    cdef Py_ssize_t m = vals.shape[0]
    cdef double inv_sqrt_c = 1.0 / sqrt(c)
    cdef double sqrt_d = sqrt(d)
    cdef long n_init = max_nodes // NODES_PER_PANEL
    if n_init < 1:
        n_init = 1
    if n_init > INIT_PANELS:
        n_init = INIT_PANELS
    cdef long cap = n_init + max_nodes // NODES_PER_PANEL + 2
    cdef double* lo = <double*> malloc(cap * sizeof(double))
    cdef double* hi = <double*> malloc(cap * sizeof(double))
    cdef double* res = <double*> malloc(cap * sizeof(double))
    cdef double* err = <double*> malloc(cap * sizeof(double))
    if lo == NULL or hi == NULL or res == NULL or err == NULL:
        free(lo); free(hi); free(res); free(err)
        raise MemoryError()

    cdef const double* pv = &vals[0] if m > 0 else NULL
    cdef const double* pm = &mult[0] if m > 0 else NULL
    cdef long npan = n_init
    cdef long n_evals = NODES_PER_PANEL * n_init
    cdef long i, worst
    cdef double width = 2.0 * halfwidth / n_init
    cdef double total = 0.0, total_err = 0.0, target, a, b, mid, emax
    cdef bint converged = False

    with nogil:
        for i in range(n_init):
            lo[i] = -halfwidth + i * width
            hi[i] = -halfwidth + (i + 1) * width if i + 1 < n_init else halfwidth
            _gk15(lo[i], hi[i], pv, pm, m, inv_sqrt_c, sqrt_d, &res[i], &err[i])
        while True:
            total = 0.0
            total_err = 0.0
            for i in range(npan):
                total += res[i]
                total_err += err[i]
            target = abs_tol
            if rel_tol * fabs(total) < target:
                target = rel_tol * fabs(total)
            if target < 1e-300:
                target = 1e-300
            if total_err <= target:
                converged = True
                break
            if n_evals + 2 * NODES_PER_PANEL > max_nodes:
                break
            worst = 0
            emax = err[0]
            for i in range(1, npan):
                if err[i] > emax:
                    emax = err[i]
                    worst = i
            a = lo[worst]
            b = hi[worst]
            mid = 0.5 * (a + b)
            hi[worst] = mid
            _gk15(a, mid, pv, pm, m, inv_sqrt_c, sqrt_d, &res[worst], &err[worst])
            lo[npan] = mid
            hi[npan] = b
            _gk15(mid, b, pv, pm, m, inv_sqrt_c, sqrt_d, &res[npan], &err[npan])
            npan += 1
            n_evals += 2 * NODES_PER_PANEL

    free(lo); free(hi); free(res); free(err)
    return total, total_err, n_evals, converged
