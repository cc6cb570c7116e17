//! Finite-difference Poisson reference: 5-point stencil on the unit
//! square with homogeneous Dirichlet data, solved matrix-free by
//! conjugate gradients.
//!
//! This is the in-repo ground truth for the Poisson–Gauss problems, which
//! have no analytical solution.

use crate::interp::{eval_point, Expr, Value};
use crate::scalar::Scalar;

use super::{PDEProblem, ReferenceGrid};

/// Solve `−Δu = f` on the problem's box with `u = 0` on the boundary,
/// using the problem's own grid; returns the full grid (boundary
/// included) as a reference field.
pub fn poisson_fd_reference(prob: &PDEProblem) -> ReferenceGrid {
    let f = prob
        .forcing
        .clone()
        .expect("Poisson reference needs a source term");
    let xs = prob.x_points();
    let ys = prob.y_points();
    let field = solve_poisson::<f64>(&f, &xs, &ys, 1e-12, 100_000);
    let mut coords = Vec::with_capacity(xs.len() * ys.len());
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            coords.push((x, y));
            values.push(field[i * ys.len() + j]);
        }
    }
    ReferenceGrid {
        coords,
        values,
        second_axis: "y".to_string(),
        provenance: "fd-5pt-cg".to_string(),
    }
}

/// 5-point-stencil solve of `−Δu = f`, zero Dirichlet boundary; returns
/// the full field row-major over `xs × ys`.
pub fn solve_poisson<S: Scalar + Value>(
    f: &Expr,
    xs: &[f64],
    ys: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let nx = xs.len();
    let ny = ys.len();
    assert!(nx >= 3 && ny >= 3, "need interior points");
    let hx = xs[1] - xs[0];
    let hy = ys[1] - ys[0];
    let (mx, my) = (nx - 2, ny - 2);
    let n = mx * my;

    // RHS: source sampled at interior nodes.
    let mut b = vec![S::zero(); n];
    for i in 0..mx {
        for j in 0..my {
            let (v, flag) = eval_point(
                f,
                S::of_f64(xs[i + 1]),
                S::of_f64(ys[j + 1]),
                S::zero(),
            );
            assert!(!flag, "source must be finite on the grid");
            b[i * my + j] = v;
        }
    }

    let inv_hx2 = S::of_f64(1.0 / (hx * hx));
    let inv_hy2 = S::of_f64(1.0 / (hy * hy));
    let diag = S::of_f64(2.0) * (inv_hx2 + inv_hy2);
    let apply = |u: &[S], out: &mut [S]| {
        for i in 0..mx {
            for j in 0..my {
                let c = u[i * my + j];
                let left = if i > 0 { u[(i - 1) * my + j] } else { S::zero() };
                let right = if i + 1 < mx { u[(i + 1) * my + j] } else { S::zero() };
                let down = if j > 0 { u[i * my + j - 1] } else { S::zero() };
                let up = if j + 1 < my { u[i * my + j + 1] } else { S::zero() };
                out[i * my + j] =
                    diag * c - inv_hx2 * (left + right) - inv_hy2 * (down + up);
            }
        }
    };

    // Plain conjugate gradients; the operator is SPD.
    let dot = |a: &[S], bb: &[S]| -> S {
        a.iter().zip(bb).map(|(&x, &y)| x * y).fold(S::zero(), |s, v| s + v)
    };
    let mut u = vec![S::zero(); n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![S::zero(); n];
    let mut rs = dot(&r, &r);
    let rs0 = rs;
    let tol2 = S::of_f64(rel_tol * rel_tol) * rs0;
    for _ in 0..max_iter {
        if rs <= tol2 {
            break;
        }
        apply(&p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for k in 0..n {
            u[k] = u[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }

    // Embed into the full grid with zero boundary.
    let mut field = vec![0.0f64; nx * ny];
    for i in 0..mx {
        for j in 0..my {
            field[(i + 1) * ny + (j + 1)] = u[i * my + j].to_f64_lossy();
        }
    }
    field
}
