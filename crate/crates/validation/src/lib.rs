//! Closed-form references used by the acceptance run. Nothing here calls
//! into the simulator, so the checks do not share code with what they test.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Ground-start state at exact resonance: the atom flies at constant speed
/// and the amplitudes rotate by the accumulated coupling. Returns
/// `[x, p, g1, g2, G1, G2]`.
pub fn resonance(x0: f64, p0: f64, omega_r: f64, tau: f64) -> [f64; 6] {
    let v = omega_r * p0;
    let theta = if v == 0.0 {
        x0.cos() * tau
    } else {
        ((x0 + v * tau).sin() - x0.sin()) / v
    };
    [x0 + v * tau, p0, theta.cos(), 0.0, 0.0, theta.sin()]
}

/// Excited population of an atom held at `x0`, started in the ground state.
pub fn frozen_excited(x0: f64, delta: f64, tau: f64) -> f64 {
    let c2 = x0.cos().powi(2);
    let w = (0.25 * delta * delta + c2).sqrt();
    if w == 0.0 {
        return 0.0;
    }
    c2 / (w * w) * (w * tau).sin().powi(2)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Spin-j image of a 2x2 matrix, built from its action on homogeneous
/// polynomials of degree `2j` in two variables. Basis
/// `a^(j+m) b^(j-m) / sqrt((j+m)! (j-m)!)`, rows and columns ordered
/// `m = j, j-1, .., -j`.
pub fn symmetric_power(m: [[Complex64; 2]; 2], two_j: usize) -> DMatrix<Complex64> {
    let dim = two_j + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut out = DMatrix::from_element(dim, dim, zero);
    for col in 0..dim {
        let (n_a, n_b) = (two_j - col, col);
        // coef[k] multiplies a^k b^(deg-k)
        let mut coef = vec![zero; dim];
        coef[0] = Complex64::new(1.0, 0.0);
        let mut deg = 0;
        let images = std::iter::repeat((m[0][0], m[1][0]))
            .take(n_a)
            .chain(std::iter::repeat((m[0][1], m[1][1])).take(n_b));
        for (ca, cb) in images {
            let mut next = vec![zero; dim];
            for k in 0..=deg {
                next[k + 1] += coef[k] * ca;
                next[k] += coef[k] * cb;
            }
            coef = next;
            deg += 1;
        }
        let norm_in = (factorial(n_a) * factorial(n_b)).sqrt();
        for row in 0..dim {
            let k = two_j - row;
            out[(row, col)] = coef[k] * (factorial(k) * factorial(two_j - k)).sqrt() / norm_in;
        }
    }
    out
}
