use crate::store::RowBlock;

#[derive(Clone, Copy)]
struct Slot {
    block: u32,
    row: u32,
    id: u64,
}

struct Held {
    rows: RowBlock,
    live: usize,
}

/// Shuffle buffer. Occupied rows are a list of slots pointing into the
/// fetched blocks; drawing removes a slot by swapping in the last one. A
/// block is released once none of its rows is occupied, and the whole buffer
/// is compacted into a single block when released-but-pinned rows pile up.
pub(crate) struct ShuffleBuffer {
    blocks: Vec<Option<Held>>,
    free: Vec<u32>,
    slots: Vec<Slot>,
    resident: usize,
    compact_above: usize,
}

impl ShuffleBuffer {
    pub fn new(capacity: usize, block_rows: usize) -> Self {
        ShuffleBuffer {
            blocks: Vec::new(),
            free: Vec::new(),
            slots: Vec::with_capacity(capacity + block_rows),
            resident: 0,
            compact_above: 2 * (capacity + block_rows),
        }
    }

    pub fn occupancy(&self) -> usize {
        self.slots.len()
    }

    /// Appends `rows` whose global indices start at `first_id`.
    pub fn push(&mut self, rows: RowBlock, first_id: u64) {
        let n = rows.n_rows();
        if n == 0 {
            return;
        }
        let held = Held { rows, live: n };
        let b = match self.free.pop() {
            Some(b) => {
                self.blocks[b as usize] = Some(held);
                b
            }
            None => {
                self.blocks.push(Some(held));
                (self.blocks.len() - 1) as u32
            }
        };
        self.slots.extend((0..n).map(|r| Slot {
            block: b,
            row: r as u32,
            id: first_id + r as u64,
        }));
        self.resident += n;
    }

    /// Removes slot `i`, copies its row onto `out` and returns its global index.
    pub fn take(&mut self, i: usize, out: &mut RowBlock) -> u64 {
        let s = self.slots.swap_remove(i);
        let held = self.blocks[s.block as usize].as_mut().unwrap();
        out.extend_rows(&held.rows, s.row as usize..s.row as usize + 1);
        held.live -= 1;
        if held.live == 0 {
            self.resident -= held.rows.n_rows();
            self.blocks[s.block as usize] = None;
            self.free.push(s.block);
        }
        if self.resident > self.compact_above {
            self.compact();
        }
        s.id
    }

    fn compact(&mut self) {
        let mut first = None;
        for h in self.blocks.iter().flatten() {
            first = Some(RowBlock::empty(h.rows.layout(), h.rows.dtype(), h.rows.n_var()));
            break;
        }
        let Some(mut merged) = first else { return };
        for (k, s) in self.slots.iter_mut().enumerate() {
            let h = self.blocks[s.block as usize].as_ref().unwrap();
            merged.extend_rows(&h.rows, s.row as usize..s.row as usize + 1);
            s.block = 0;
            s.row = k as u32;
        }
        self.blocks.clear();
        self.free.clear();
        self.resident = self.slots.len();
        self.blocks.push(Some(Held {
            live: self.slots.len(),
            rows: merged,
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{DenseBlock, Values};

    fn rows(start: u64, n: usize) -> RowBlock {
        DenseBlock::new(n, 1, Values::F64((0..n).map(|i| (start + i as u64) as f64).collect()))
            .unwrap()
            .into()
    }

    #[test]
    fn swap_with_last_and_compaction_keep_rows_aligned() {
        let mut buf = ShuffleBuffer::new(4, 2);
        let mut out = RowBlock::Dense(DenseBlock::new(0, 1, Values::F64(vec![])).unwrap());
        let mut ids = Vec::new();
        let mut next = 0u64;
        for step in 0..200 {
            while buf.occupancy() < 5 && next < 300 {
                buf.push(rows(next, 2), next);
                next += 2;
            }
            // always take slot 0 so old blocks stay pinned and compaction kicks in
            let i = if step % 3 == 0 { 0 } else { buf.occupancy() - 1 };
            ids.push(buf.take(i, &mut out));
            assert!(buf.resident <= buf.compact_above);
        }
        for (k, &id) in ids.iter().enumerate() {
            assert_eq!(out.get(k, 0), id as f64);
        }
    }
}
