use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::cost::ExtendedCost;
use super::{BuildError, CostMatrix, GameParams};

/// The instance family queried by the adversary, over `n` machines and
/// `2n-1` tasks.
///
/// Tasks `0..n` are *dummy* tasks: task `d` costs 0 for machine `d` and is
/// unbounded for everyone else, so a finite-ratio mechanism must hand it to
/// its owner. Tasks `n..2n-1` are *proper* tasks, indexed here by their
/// ordinal `j` in `1..=n-1` (ordinal `j` is column `n + j - 1`), with costs
/// drawn from the geometric scale `a^{-k}`.
///
/// * `A0` — baseline: machines 0 and 1 price every proper task equally;
///   machine `j` is the sole alternative for ordinal `j >= 2`.
/// * `A1` — machine 0's whole proper row is discounted (ordinal 1 from 1 to
///   `r`, the rest by a factor of `a`).
/// * `B1` — machine 0's dummy rises to 1 and her proper costs each drop by
///   `epsilon`, pinning them to her.
/// * `B2 { j }` — machine 0's ordinals below `j` collapse to 0 while
///   ordinal `j` rises by `epsilon`.
/// * `C2 { j, detour }` — the detour machine (1 or `j`) has its dummy
///   raised to `a^{-(j-1)}` and its ordinal-`j` cost dropped by `epsilon`.
/// * `B3` — machine 0's ordinal 2 collapses to 0 while ordinal 1 rises by
///   `epsilon`.
/// * `C3` — machine 1's dummy rises to `max(r, 1/a)` and her ordinal-1 cost
///   drops by `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MatrixKind {
    A0,
    A1,
    B1,
    B2 { j: usize },
    C2 { j: usize, detour: usize },
    B3,
    C3,
}

impl MatrixKind {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixKind::A0 => "A0",
            MatrixKind::A1 => "A1",
            MatrixKind::B1 => "B1",
            MatrixKind::B2 { .. } => "B2",
            MatrixKind::C2 { .. } => "C2",
            MatrixKind::B3 => "B3",
            MatrixKind::C3 => "C3",
        }
    }
}

/// Column index of the proper task with ordinal `j` (`1..=n-1`).
pub fn proper_column(n: usize, j: usize) -> usize {
    n + j - 1
}

/// Construct one member of the adversary's instance family.
pub fn build_matrix(kind: MatrixKind, params: &GameParams) -> Result<CostMatrix, BuildError> {
    params.validate()?;
    let n = params.n;
    validate_kind(kind, n)?;

    let mut rows = base_a0(params);
    match kind {
        MatrixKind::A0 => {}
        MatrixKind::A1 => discount_row0(params, &mut rows),
        MatrixKind::B1 => {
            discount_row0(params, &mut rows);
            rows[0][0] = ExtendedCost::Finite(1.0);
            for j in 1..n {
                let col = proper_column(n, j);
                let v = rows[0][col].value().expect("proper entries are finite");
                rows[0][col] = ExtendedCost::Finite(v - params.epsilon);
            }
        }
        MatrixKind::B2 { j } => {
            discount_row0(params, &mut rows);
            raise_lowest_missing(params, &mut rows, j);
        }
        MatrixKind::C2 { j, detour } => {
            discount_row0(params, &mut rows);
            raise_lowest_missing(params, &mut rows, j);
            rows[detour][detour] = ExtendedCost::Finite(params.inv_power(j - 1));
            let col = proper_column(n, j);
            let v = rows[detour][col].value().expect("detour entry is finite");
            rows[detour][col] = ExtendedCost::Finite(v - params.epsilon);
        }
        MatrixKind::B3 => {
            discount_row0(params, &mut rows);
            pin_second_ordinal(params, &mut rows);
        }
        MatrixKind::C3 => {
            discount_row0(params, &mut rows);
            pin_second_ordinal(params, &mut rows);
            let dummy_price = params.r.max(params.inv_power(1));
            rows[1][1] = ExtendedCost::Finite(dummy_price);
            let col = proper_column(n, 1);
            rows[1][col] = ExtendedCost::Finite(1.0 - params.epsilon);
        }
    }

    CostMatrix::from_rows(rows).map_err(BuildError::Instance)
}

fn validate_kind(kind: MatrixKind, n: usize) -> Result<(), BuildError> {
    match kind {
        MatrixKind::B2 { j } => check_ordinal(j, n),
        MatrixKind::C2 { j, detour } => {
            check_ordinal(j, n)?;
            if detour != 1 && detour != j {
                return Err(BuildError::InvalidDetourMachine { machine: detour, j });
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_ordinal(j: usize, n: usize) -> Result<(), BuildError> {
    if j < 2 || j > n - 1 {
        Err(BuildError::InvalidDetourIndex { j, n })
    } else {
        Ok(())
    }
}

/// The baseline instance: dummy block plus undiscounted proper costs.
fn base_a0(params: &GameParams) -> Vec<Vec<ExtendedCost>> {
    let n = params.n;
    let m = 2 * n - 1;
    let mut rows = vec![vec![ExtendedCost::Unbounded; m]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = ExtendedCost::ZERO;
    }
    for j in 1..n {
        let col = proper_column(n, j);
        let price = if j == 1 {
            1.0
        } else {
            params.inv_power(j - 2)
        };
        rows[0][col] = ExtendedCost::Finite(price);
        rows[1][col] = ExtendedCost::Finite(price);
        if j >= 2 {
            rows[j][col] = ExtendedCost::Finite(price);
        }
    }
    rows
}

/// Machine 0's proper row after the discount step: ordinal 1 falls to `r`,
/// every other ordinal falls by a factor of `a`.
fn discount_row0(params: &GameParams, rows: &mut [Vec<ExtendedCost>]) {
    let n = params.n;
    for j in 1..n {
        let price = if j == 1 {
            params.r
        } else {
            params.inv_power(j - 1)
        };
        rows[0][proper_column(n, j)] = ExtendedCost::Finite(price);
    }
}

/// Machine 0 keeps ordinals below `j` for free while ordinal `j` gets
/// slightly more expensive.
fn raise_lowest_missing(params: &GameParams, rows: &mut [Vec<ExtendedCost>], j: usize) {
    let n = params.n;
    for p in 1..j {
        rows[0][proper_column(n, p)] = ExtendedCost::ZERO;
    }
    rows[0][proper_column(n, j)] = ExtendedCost::Finite(params.inv_power(j - 1) + params.epsilon);
}

/// Machine 0 keeps ordinal 2 for free while ordinal 1 gets slightly more
/// expensive.
fn pin_second_ordinal(params: &GameParams, rows: &mut [Vec<ExtendedCost>]) {
    let n = params.n;
    rows[0][proper_column(n, 1)] = ExtendedCost::Finite(params.r + params.epsilon);
    rows[0][proper_column(n, 2)] = ExtendedCost::ZERO;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_n3() -> GameParams {
        GameParams::new(3, 1.0 / core::f64::consts::SQRT_2, core::f64::consts::SQRT_2).unwrap()
    }

    #[test]
    fn a0_shape_for_three_machines() {
        let p = params_n3();
        let t = build_matrix(MatrixKind::A0, &p).unwrap();
        assert_eq!((t.machines(), t.tasks()), (3, 5));
        // Dummy block.
        for i in 0..3 {
            for d in 0..3 {
                if i == d {
                    assert_eq!(t.get(i, d), ExtendedCost::Finite(0.0));
                } else {
                    assert!(t.get(i, d).is_unbounded());
                }
            }
        }
        // Proper tasks: rows 0 and 1 price both at 1; machine 2 can only do
        // the second one.
        for i in 0..2 {
            assert_eq!(t.get(i, 3), ExtendedCost::Finite(1.0));
            assert_eq!(t.get(i, 4), ExtendedCost::Finite(1.0));
        }
        assert!(t.get(2, 3).is_unbounded());
        assert_eq!(t.get(2, 4), ExtendedCost::Finite(1.0));
    }

    #[test]
    fn a1_discounts_only_row_zero() {
        let p = params_n3();
        let a0 = build_matrix(MatrixKind::A0, &p).unwrap();
        let a1 = build_matrix(MatrixKind::A1, &p).unwrap();
        assert_eq!(a1.get(0, 3), ExtendedCost::Finite(p.r));
        assert_eq!(a1.get(0, 4), ExtendedCost::Finite(p.inv_power(1)));
        for i in 1..3 {
            assert_eq!(a0.row(i), a1.row(i));
        }
        // Row 0 only ever gets cheaper.
        for j in 0..5 {
            assert!(a1.get(0, j) <= a0.get(0, j));
        }
    }

    #[test]
    fn c3_prices_the_second_dummy() {
        let p = params_n3();
        let c3 = build_matrix(MatrixKind::C3, &p).unwrap();
        let expect = p.r.max(p.inv_power(1));
        assert_eq!(c3.get(1, 1), ExtendedCost::Finite(expect));
        assert_eq!(c3.get(1, 3), ExtendedCost::Finite(1.0 - p.epsilon));
        assert_eq!(c3.get(0, 3), ExtendedCost::Finite(p.r + p.epsilon));
        assert_eq!(c3.get(0, 4), ExtendedCost::Finite(0.0));
    }

    #[test]
    fn detour_validation() {
        let p = GameParams::new(4, 0.55, 1.6).unwrap();
        assert!(matches!(
            build_matrix(MatrixKind::B2 { j: 1 }, &p),
            Err(BuildError::InvalidDetourIndex { .. })
        ));
        assert!(matches!(
            build_matrix(MatrixKind::B2 { j: 4 }, &p),
            Err(BuildError::InvalidDetourIndex { .. })
        ));
        assert!(matches!(
            build_matrix(MatrixKind::C2 { j: 2, detour: 3 }, &p),
            Err(BuildError::InvalidDetourMachine { .. })
        ));
        assert!(build_matrix(MatrixKind::C2 { j: 2, detour: 2 }, &p).is_ok());
        assert!(build_matrix(MatrixKind::C2 { j: 3, detour: 1 }, &p).is_ok());
    }

    #[test]
    fn every_kind_has_finite_columns() {
        let p = GameParams::new(5, 0.6, 1.7).unwrap();
        let kinds = [
            MatrixKind::A0,
            MatrixKind::A1,
            MatrixKind::B1,
            MatrixKind::B2 { j: 2 },
            MatrixKind::B2 { j: 4 },
            MatrixKind::C2 { j: 3, detour: 1 },
            MatrixKind::C2 { j: 3, detour: 3 },
            MatrixKind::B3,
            MatrixKind::C3,
        ];
        for kind in kinds {
            // CostMatrix::new would have failed on an all-unbounded column.
            let t = build_matrix(kind, &p).unwrap();
            assert_eq!((t.machines(), t.tasks()), (5, 9), "{kind:?}");
        }
    }
}
