//! Shared test oracles, independent of the implementation paths they check:
//! characteristic-polynomial root finding, a direct monolithic FEM assembler,
//! random pencil generators and Monte-Carlo numerical-range sampling.
#![allow(dead_code)] // each test binary uses its own subset

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};
use num_complex::Complex;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbeig::hifi::{Mesh2D, ParameterPoint};

/// Determinant via LU with partial pivoting (own implementation; the oracle
/// path must not depend on the library's solvers).
pub fn determinant(m: &Mat<f64>) -> f64 {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let mut det = 1.0f64;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Coefficients of `p(x) = det(A - x B)` by exact interpolation at n+1
/// integer nodes (Vandermonde solve in f64).
pub fn char_poly_coeffs(a: &Mat<f64>, b: &Mat<f64>) -> Vec<f64> {
    let n = a.nrows();
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 - n as f64 / 2.0).collect();
    let values: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - x * b[(i, j)]);
            determinant(&shifted)
        })
        .collect();
    let vmat = Mat::from_fn(n + 1, n + 1, |i, j| nodes[i].powi(j as i32));
    let rhs = Col::from_fn(n + 1, |i| values[i]);
    let sol = vmat.partial_piv_lu().solve(&rhs);
    (0..=n).map(|i| sol[i]).collect()
}

/// Aberth-Ehrlich root finder for real-coefficient polynomials
/// `c_0 + c_1 x + ... + c_d x^d` (trailing zero coefficients trimmed).
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last().is_some_and(|&x| x == 0.0) {
        c.pop();
    }
    let d = c.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let scale = c[d];
    let monic: Vec<f64> = c.iter().map(|x| x / scale).collect();

    let radius = 1.0
        + monic[..d]
            .iter()
            .map(|x| x.abs())
            .fold(0.0f64, f64::max);
    let mut roots: Vec<Complex<f64>> = (0..d)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            Complex::from_polar(radius * 0.5, angle)
        })
        .collect();

    let eval = |z: Complex<f64>| {
        let mut p = Complex::new(0.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &coef in monic.iter().rev() {
            dp = dp * z + p;
            p = p * z + coef;
        }
        (p, dp)
    };

    for _ in 0..200 {
        let mut shift = 0.0f64;
        let prev = roots.clone();
        for i in 0..d {
            let (p, dp) = eval(prev[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let newton = p / dp;
            let mut repulse = Complex::new(0.0, 0.0);
            for (j, &other) in prev.iter().enumerate() {
                if j != i {
                    repulse += (prev[i] - other).finv();
                }
            }
            let delta = newton / (Complex::new(1.0, 0.0) - newton * repulse);
            roots[i] -= delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    roots
}

/// Random orthogonal matrix via Gram-Schmidt of a Gaussian-ish sample.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let raw = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let qr = raw.qr();
    qr.compute_Q()
}

/// Random SPD matrix with prescribed eigenvalues.
pub fn spd_with_eigenvalues(eigs: &[f64], rng: &mut ChaCha8Rng) -> Mat<f64> {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    let d = Mat::from_fn(n, n, |i, j| if i == j { eigs[i] } else { 0.0 });
    &(&q * &d) * &q.transpose()
}

/// Random skew-symmetric matrix with entries in [-1, 1].
pub fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let raw = Mat::from_fn(n, n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    Mat::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] - raw[(j, i)]))
}

/// SPD-plus-skew pencil `(A, I)` satisfying the dominance assumption: the
/// smallest eigenvalue is simple, positive and well separated.
pub fn assumption_pencil(n: usize, skew_scale: f64, rng: &mut ChaCha8Rng) -> (Mat<f64>, Mat<f64>) {
    let mut eigs: Vec<f64> = Vec::with_capacity(n);
    let lo = 0.5;
    let mut current = lo;
    for _ in 0..n {
        eigs.push(current);
        current *= 1.07 + 0.4 * rng.random::<f64>();
    }
    let s = spd_with_eigenvalues(&eigs, rng);
    let t = random_skew(n, rng);
    let a = &s + &(skew_scale * &t);
    (a, Mat::identity(n, n))
}

/// Monte-Carlo estimate of the real numerical range extent.
pub fn sample_quadratic_form_range(q: &Mat<f64>, samples: usize, seed: u64) -> (f64, f64) {
    let n = q.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..samples {
        let mut v = Col::from_fn(n, |_| 2.0 * rng.random::<f64>() - 1.0);
        let norm = v.norm_l2();
        if norm == 0.0 {
            continue;
        }
        for i in 0..n {
            v[i] /= norm;
        }
        let val: f64 = v.transpose() * &(q * &v);
        lo = lo.min(val);
        hi = hi.max(val);
    }
    (lo, hi)
}

/// Direct monolithic assembly of the two-group operators, written against
/// closed-form Q1 element matrices rather than quadrature, used to check the
/// affine decomposition.
pub fn direct_assemble_dense(mesh: &Mesh2D, mu: &ParameterPoint) -> (Mat<f64>, Mat<f64>) {
    let n_dof = mesh.dofs_per_group();
    let dim = mesh.system_dim();
    let h = mesh.h();
    let mass = |i: usize, j: usize| -> f64 {
        let m = [
            [4.0, 2.0, 1.0, 2.0],
            [2.0, 4.0, 2.0, 1.0],
            [1.0, 2.0, 4.0, 2.0],
            [2.0, 1.0, 2.0, 4.0],
        ];
        h * h / 36.0 * m[i][j]
    };
    let stiff = |i: usize, j: usize| -> f64 {
        let k = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        k[i][j] / 6.0
    };

    let mut a = Mat::<f64>::zeros(dim, dim);
    let mut b = Mat::<f64>::zeros(dim, dim);
    for cy in 0..mesh.cells_per_side {
        for cx in 0..mesh.cells_per_side {
            let k_sub = mesh.cell_subdomain(cx, cy);
            let sd = &mu.subdomains[k_sub];
            let [d1, s11, s12, d2, s21, s22] = sd.f;
            let nodes = mesh.cell_nodes(cx, cy);
            for i in 0..4 {
                for j in 0..4 {
                    let (di, dj) = match (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j])) {
                        (Some(x), Some(y)) => (x, y),
                        _ => continue,
                    };
                    let st = stiff(i, j);
                    let ms = mass(i, j);
                    a[(di, dj)] += d1 * st + s11 * ms;
                    a[(di, n_dof + dj)] += s12 * ms;
                    a[(n_dof + di, dj)] += s21 * ms;
                    a[(n_dof + di, n_dof + dj)] += d2 * st + s22 * ms;
                    b[(di, dj)] += sd.g[0] * ms;
                    b[(di, n_dof + dj)] += sd.g[1] * ms;
                    b[(n_dof + di, dj)] += sd.g[2] * ms;
                    b[(n_dof + di, n_dof + dj)] += sd.g[3] * ms;
                }
            }
        }
    }
    if matches!(mesh.bc, rbeig::hifi::BoundaryKind::Robin) {
        for (n0, n1) in mesh.boundary_edges() {
            let d0 = mesh.dof_of_node(n0).unwrap();
            let d1 = mesh.dof_of_node(n1).unwrap();
            let em = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
            let pairs = [(d0, d0, em[0][0]), (d0, d1, em[0][1]), (d1, d0, em[1][0]), (d1, d1, em[1][1])];
            for &(i, j, v) in &pairs {
                a[(i, j)] += 0.5 * v;
                a[(n_dof + i, n_dof + j)] += 0.5 * v;
            }
        }
    }
    (a, b)
}
