use std::fmt::Write as _;

use crate::error::{domain, invariant, Result};
use crate::lsf::fifo_array::{FifoArray, RowService};
use crate::model::StripeId;

/// Planned service schedule of a [`FifoArray`]: `columns[c][row - 1]` is the
/// stripe served at that row during the `c`-th upcoming cycle of `N` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleGrid {
    n: usize,
    columns: Vec<Vec<Option<StripeId>>>,
}

impl ScheduleGrid {
    pub fn from_columns(n: usize, columns: Vec<Vec<Option<StripeId>>>) -> Self {
        assert!(columns.iter().all(|c| c.len() == n));
        ScheduleGrid { n, columns }
    }

    /// Replays LSF service on a copy of `fa`, starting at row 1 of a fresh cycle.
    pub fn plan(fa: &FifoArray) -> Result<Self> {
        if !fa.all_idle() {
            return domain("a schedule can only be planned at a cycle boundary");
        }
        let n = fa.n();
        let mut fa = fa.clone();
        let mut columns = Vec::new();
        while !fa.is_empty() {
            let mut column = vec![None; n];
            for (row, cell) in (1..=n).zip(column.iter_mut()) {
                if let RowService::Served(p) = fa.serve_row(row)? {
                    *cell = p.stripe;
                }
            }
            if column.iter().all(Option::is_none) {
                return invariant(format!("schedule stalls with {} packets queued", fa.len()));
            }
            columns.push(column);
        }
        Ok(ScheduleGrid { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<StripeId> {
        self.columns.get(column).and_then(|c| c[row - 1])
    }

    pub fn clear_cell(&mut self, row: usize, column: usize) {
        self.columns[column][row - 1] = None;
    }

    /// Text dump with the first cycle in the rightmost column, `.` for empty cells.
    pub fn render_with(&self, label: impl Fn(StripeId) -> char) -> String {
        let mut out = String::new();
        for row in 1..=self.n {
            for col in self.columns.iter().rev() {
                out.push(col[row - 1].map_or('.', &label));
            }
            let _ = writeln!(out);
        }
        out
    }
}

/// True iff every row's occupied cells form a prefix starting at the first cycle.
pub fn no_hole_check(grid: &ScheduleGrid) -> bool {
    (1..=grid.n).all(|row| {
        let mut seen_empty = false;
        grid.columns.iter().all(|col| match col[row - 1] {
            None => {
                seen_empty = true;
                true
            }
            Some(_) => !seen_empty,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Packet, Stripe, StripeInterval};

    fn stripe(tag: usize, lo: usize, size: usize) -> Stripe {
        let id = StripeId { input: 1, output: tag, seq: 0 };
        let packets = (0..size)
            .map(|m| {
                let mut p = Packet::new((tag * 10 + m) as u64, 1, tag, 0);
                p.stripe = Some(id);
                p.stripe_size = Some(size);
                p
            })
            .collect();
        Stripe { id, size, interval: StripeInterval::new(lo, lo + size).unwrap(), packets, formation_slot: 0 }
    }

    fn letter(id: StripeId) -> char {
        (b'A' + id.output as u8 - 1) as char
    }

    #[test]
    fn empty_grid_has_no_hole() {
        let g = ScheduleGrid::plan(&FifoArray::new(8)).unwrap();
        assert_eq!(g.columns(), 0);
        assert!(no_hole_check(&g));
    }

    #[test]
    fn removed_cell_creates_hole() {
        let mut fa = FifoArray::new(4);
        fa.enqueue_stripe(stripe(1, 0, 4));
        fa.enqueue_stripe(stripe(2, 0, 4));
        fa.enqueue_stripe(stripe(3, 0, 4));
        let mut g = ScheduleGrid::plan(&fa).unwrap();
        assert!(no_hole_check(&g));
        g.clear_cell(2, 1);
        assert!(!no_hole_check(&g));
    }

    #[test]
    fn plan_rejects_mid_cycle_state() {
        let mut fa = FifoArray::new(4);
        fa.enqueue_stripe(stripe(1, 0, 2));
        fa.serve_row(1).unwrap();
        assert!(ScheduleGrid::plan(&fa).is_err());
    }

    /// Eight-port instance: one full-size stripe served during the first cycle
    /// while a size-4 stripe arrives and jumps ahead of the smaller stripes.
    #[test]
    fn insertion_ahead_of_smaller_stripes() {
        let mut fa = FifoArray::new(8);
        // A: size 8; B, C, D: size 4 (C, D on ports 5..8); G, H: size 2 on ports 1..4;
        // F: size 2 at (4,6]; I: size 1 at port 7
        for s in [
            stripe(1, 0, 8),
            stripe(2, 0, 4),
            stripe(3, 4, 4),
            stripe(7, 0, 2),
            stripe(8, 2, 2),
            stripe(4, 4, 4),
            stripe(6, 4, 2),
            stripe(9, 6, 1),
        ] {
            fa.enqueue_stripe(s);
        }
        let before = ScheduleGrid::plan(&fa).unwrap();
        assert!(no_hole_check(&before));
        assert_eq!(
            before.render_with(letter),
            concat!(
                ".GBA\n", //
                ".GBA\n", ".HBA\n", ".HBA\n", "FDCA\n", "FDCA\n", "IDCA\n", ".DCA\n",
            )
        );

        for row in 1..=8 {
            fa.serve_row(row).unwrap();
        }
        fa.enqueue_stripe(stripe(5, 4, 4));
        let after = ScheduleGrid::plan(&fa).unwrap();
        assert!(no_hole_check(&after));
        assert_eq!(
            after.render_with(letter),
            concat!(
                "..GB\n", //
                "..GB\n", "..HB\n", "..HB\n", "FEDC\n", "FEDC\n", "IEDC\n", ".EDC\n",
            )
        );
        assert_eq!(
            fa.render(),
            concat!(
                "  1 | [] [1>2#0] [1>7#0] []\n",
                "  2 | [] [1>2#0] [1>7#0] []\n",
                "  3 | [] [1>2#0] [1>8#0] []\n",
                "  4 | [] [1>2#0] [1>8#0] []\n",
                "  5 | [] [1>3#0 1>4#0 1>5#0] [1>6#0] []\n",
                "  6 | [] [1>3#0 1>4#0 1>5#0] [1>6#0] []\n",
                "  7 | [] [1>3#0 1>4#0 1>5#0] [] [1>9#0]\n",
                "  8 | [] [1>3#0 1>4#0 1>5#0] [] []\n",
            )
        );
    }
}
