//! Tiny dense solvers for the 2x2 and 3x3 normal equations used by the
//! fitting code. Partial pivoting, inverse returned alongside the solution
//! for covariance use. Returns None on (near) singular systems.

pub(crate) fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<([f64; 2], [[f64; 2]; 2])> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if det.abs() < 1e-12 * scale * scale {
        return None;
    }
    let inv = [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ];
    let x = [
        inv[0][0] * b[0] + inv[0][1] * b[1],
        inv[1][0] * b[0] + inv[1][1] * b[1],
    ];
    Some((x, inv))
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    // Augment with the identity to invert alongside the solve.
    let mut m = [[0.0f64; 7]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3 + i] = 1.0;
        m[i][6] = b[i];
    }
    let scale: f64 = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot_row);
        let pivot = m[col][col];
        for k in col..7 {
            m[col][k] /= pivot;
        }
        for row in 0..3 {
            if row != col {
                let f = m[row][col];
                for k in col..7 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let x = [m[0][6], m[1][6], m[2][6]];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i].copy_from_slice(&m[i][3..6]);
    }
    Some((x, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve2_known_system() {
        let (x, _) = solve2([[2.0, 1.0], [1.0, 3.0]], [5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve2_rejects_singular() {
        assert!(solve2([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0]).is_none());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn solve3_roundtrip_with_inverse() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = [1.0, -2.0, 0.5];
        let (x, inv) = solve3(a, b).unwrap();
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
            for k in 0..3 {
                let aik: f64 = (0..3).map(|j| a[i][j] * inv[j][k]).sum();
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((aik - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve3_rejects_singular() {
        let a = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]];
        assert!(solve3(a, [0.0, 0.0, 0.0]).is_none());
    }
}
