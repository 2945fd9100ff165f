/// Dense table over a set of variables, row-major with the last variable fastest.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Self {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.vars.len()];
        let mut acc = 1;
        for k in (0..self.vars.len()).rev() {
            strides[k] = acc;
            acc *= self.cards[k];
        }
        strides
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    /// Fixes `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let outer = strides[pos] * self.cards[pos];
        let inner = strides[pos];
        let mut values = Vec::with_capacity(size);
        for block in self.values.chunks(outer) {
            values.extend_from_slice(&block[state * inner..(state + 1) * inner]);
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let project = |f: &Factor| -> Vec<usize> {
            let strides = f.strides();
            vars.iter()
                .map(|v| f.vars.iter().position(|w| w == v).map_or(0, |k| strides[k]))
                .collect()
        };
        let sa = project(self);
        let sb = project(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // Odometer increment, last variable fastest.
            for k in (0..vars.len()).rev() {
                counter[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if counter[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                counter[k] = 0;
            }
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let inner = strides[pos];
        let card = self.cards[pos];
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let mut values = Vec::with_capacity(self.values.len() / card);
        for block in self.values.chunks(inner * card) {
            for j in 0..inner {
                values.push((0..card).map(|s| block[s * inner + j]).sum());
            }
        }
        Factor {
            vars,
            cards,
            values,
        }
    }
}
