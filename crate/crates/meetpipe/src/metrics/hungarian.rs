/// Minimum-cost one-to-one assignment on a rectangular cost matrix
/// (shortest augmenting path with potentials, O(n^2 m)).
///
/// Returns one column per row (`None` when rows outnumber columns and the
/// row stays unassigned) together with the total cost of the assignment.
pub fn hungarian(costs: &[Vec<f64>]) -> (Vec<Option<usize>>, f64) {
    let rows = costs.len();
    if rows == 0 {
        return (Vec::new(), 0.0);
    }
    let cols = costs[0].len();
    assert!(
        costs.iter().all(|r| r.len() == cols),
        "cost matrix rows must have equal length"
    );
    if cols == 0 {
        return (vec![None; rows], 0.0);
    }
    assert!(
        costs.iter().flatten().all(|c| c.is_finite()),
        "cost matrix entries must be finite"
    );

    // The augmenting-path formulation needs rows <= cols; transpose otherwise.
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| costs[i][j]).collect())
            .collect();
        let (col_to_row, total) = hungarian(&transposed);
        let mut assignment = vec![None; rows];
        for (j, i) in col_to_row.iter().enumerate() {
            if let Some(i) = i {
                assignment[*i] = Some(j);
            }
        }
        return (assignment, total);
    }

    let n = rows;
    let m = cols;
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_v = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=m {
        let i = matched_row[j];
        if i > 0 {
            assignment[i - 1] = Some(j - 1);
            total += costs[i - 1][j - 1];
        }
    }
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all injections rows -> columns.
    fn brute_force(costs: &[Vec<f64>]) -> f64 {
        fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == costs.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..costs[0].len() {
                if !used[j] {
                    used[j] = true;
                    let c = costs[row][j] + rec(costs, row + 1, used);
                    used[j] = false;
                    best = best.min(c);
                }
            }
            best
        }
        rec(costs, 0, &mut vec![false; costs[0].len()])
    }

    #[test]
    fn empty_matrix() {
        let (assignment, total) = hungarian(&[]);
        assert!(assignment.is_empty());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn single_cell() {
        let (assignment, total) = hungarian(&[vec![3.5]]);
        assert_eq!(assignment, vec![Some(0)]);
        assert_eq!(total, 3.5);
    }

    #[test]
    fn diagonal_dominant() {
        let costs = vec![
            vec![0.0, 9.0, 9.0],
            vec![9.0, 0.0, 9.0],
            vec![9.0, 9.0, 0.0],
        ];
        let (assignment, total) = hungarian(&costs);
        assert_eq!(assignment, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn rectangular_shapes() {
        // More columns than rows: every row assigned.
        let costs = vec![vec![5.0, 1.0, 7.0], vec![2.0, 9.0, 3.0]];
        let (assignment, total) = hungarian(&costs);
        assert_eq!(assignment, vec![Some(1), Some(0)]);
        assert_eq!(total, 3.0);

        // More rows than columns: one row left out.
        let costs = vec![vec![5.0], vec![1.0], vec![4.0]];
        let (assignment, total) = hungarian(&costs);
        assert_eq!(assignment, vec![None, Some(0), None]);
        assert_eq!(total, 1.0);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let costs: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| (next() * 20.0) - 10.0).collect())
                .collect();
            let (_, total) = hungarian(&costs);
            let expect = brute_force(&costs);
            assert!(
                (total - expect).abs() < 1e-9,
                "hungarian {total} != brute force {expect} for {costs:?}"
            );
        }
    }
}
