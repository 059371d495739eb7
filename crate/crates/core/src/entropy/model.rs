/// Counts never grow past this total; reaching it halves every count.
pub const MAX_TOTAL: u32 = 1 << 16;
/// Count added to a symbol each time it is coded.
pub const INCREMENT: u32 = 32;

/// Adaptive order-0 frequency model backed by a Fenwick tree.
#[derive(Clone, Debug)]
pub struct AdaptiveModel {
    freqs: Vec<u32>,
    tree: Vec<u32>,
    total: u32,
}

impl AdaptiveModel {
    /// Every symbol starts with a count of one.
    pub fn new(symbols: usize) -> Self {
        let mut m = Self {
            freqs: vec![1; symbols],
            tree: vec![0; symbols + 1],
            total: 0,
        };
        m.rebuild();
        m
    }

    fn rebuild(&mut self) {
        self.tree.fill(0);
        for (i, f) in self.freqs.iter().enumerate() {
            let mut j = i + 1;
            while j < self.tree.len() {
                self.tree[j] += f;
                j += j & j.wrapping_neg();
            }
        }
        self.total = self.freqs.iter().sum();
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn freq(&self, symbol: usize) -> u32 {
        self.freqs[symbol]
    }

    /// Sum of counts of all symbols below `symbol`.
    pub fn cumulative(&self, symbol: usize) -> u32 {
        let mut acc = 0;
        let mut j = symbol;
        while j > 0 {
            acc += self.tree[j];
            j &= j - 1;
        }
        acc
    }

    /// Symbol whose cumulative interval contains `target`, with its low edge.
    pub fn find(&self, target: u32) -> (usize, u32) {
        let mut pos = 0usize;
        let mut rem = target;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        (pos, target - rem)
    }

    pub fn update(&mut self, symbol: usize) {
        self.freqs[symbol] += INCREMENT;
        self.total += INCREMENT;
        let mut j = symbol + 1;
        while j < self.tree.len() {
            self.tree[j] += INCREMENT;
            j += j & j.wrapping_neg();
        }
        if self.total >= MAX_TOTAL {
            for f in &mut self.freqs {
                *f = f.div_ceil(2);
            }
            self.rebuild();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenwick_agrees_with_linear_scan() {
        let mut m = AdaptiveModel::new(37);
        for k in 0..5000usize {
            m.update((k * k + 3 * k) % 37);
            if k % 97 == 0 {
                let mut acc = 0;
                for s in 0..37 {
                    assert_eq!(m.cumulative(s), acc);
                    let (found, low) = m.find(acc);
                    assert_eq!((found, low), (s, acc));
                    let (found, _) = m.find(acc + m.freq(s) - 1);
                    assert_eq!(found, s);
                    acc += m.freq(s);
                }
                assert_eq!(acc, m.total());
                assert!(m.total() < MAX_TOTAL);
            }
        }
    }
}
