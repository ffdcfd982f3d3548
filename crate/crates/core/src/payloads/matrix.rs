// SPDX-License-Identifier: Apache-2.0

//! Exact integer matrix arithmetic for the matrix payload.

/// Side length of the payload matrices.
pub const DIM: usize = 8;

/// Entries of the payload's input matrices lie in `[-ENTRY_BOUND, ENTRY_BOUND]`.
pub const ENTRY_BOUND: i8 = 8;

pub type SquareMatrix = Vec<Vec<i128>>;

pub fn identity(n: usize) -> SquareMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}

pub fn multiply(a: &[Vec<i128>], b: &[Vec<i128>]) -> SquareMatrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Fraction-free (Bareiss) elimination with row pivoting. Every division is
/// exact; `None` signals i128 overflow in an intermediate minor.
pub fn determinant(matrix: &[Vec<i128>]) -> Option<i128> {
    let n = matrix.len();
    if n == 0 {
        return Some(1);
    }
    let mut a: SquareMatrix = matrix.to_vec();
    let mut negate = false;
    let mut previous_pivot: i128 = 1;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(swap) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return Some(0);
            };
            a.swap(k, swap);
            negate = !negate;
        }
        let pivot = a[k][k];
        for i in k + 1..n {
            for j in k + 1..n {
                let lhs = a[i][j].checked_mul(pivot)?;
                let rhs = a[i][k].checked_mul(a[k][j])?;
                a[i][j] = lhs.checked_sub(rhs)? / previous_pivot;
            }
            a[i][k] = 0;
        }
        previous_pivot = pivot;
    }
    let det = a[n - 1][n - 1];
    Some(if negate { -det } else { det })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_determinant() {
        assert_eq!(determinant(&identity(8)), Some(1));
        assert_eq!(determinant(&multiply(&identity(8), &identity(8))), Some(1));
    }

    #[test]
    fn repeated_rows_are_singular() {
        let mut a = identity(8);
        a[5] = a[2].clone();
        let b: SquareMatrix = (0..8)
            .map(|i| (0..8).map(|j| ((i * 3 + j * 5) % 17) as i128 - 8).collect())
            .collect();
        assert_eq!(determinant(&a), Some(0));
        assert_eq!(determinant(&multiply(&a, &b)), Some(0));
    }

    #[test]
    fn pivoting_sign() {
        let m = vec![vec![0, 1], vec![1, 0]];
        assert_eq!(determinant(&m), Some(-1));
        let m = vec![vec![0, 0, 1], vec![0, 2, 0], vec![3, 0, 0]];
        assert_eq!(determinant(&m), Some(-6));
    }

    #[test]
    fn small_known_values() {
        assert_eq!(determinant(&[vec![7]]), Some(7));
        assert_eq!(determinant(&[vec![2, 3], vec![4, 5]]), Some(-2));
        let m = vec![vec![2, -3, 1], vec![2, 0, -1], vec![1, 4, 5]];
        assert_eq!(determinant(&m), Some(49));
    }
}
