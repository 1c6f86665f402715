use serde::{Deserialize, Serialize};

/// Square `side × side` grid stored row-major as `[lz][ly]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid<T> {
    side: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(side * side);
        for lz in 0..side {
            for ly in 0..side {
                data.push(f(lz, ly));
            }
        }
        Self { side, data }
    }

    pub fn from_vec(side: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == side * side).then_some(Self { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            side: self.side,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(side: usize, value: T) -> Self {
        Self {
            side,
            data: vec![value; side * side],
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (lz, ly): (usize, usize)) -> &T {
        assert!(lz < self.side && ly < self.side, "grid index out of range");
        &self.data[lz * self.side + ly]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (lz, ly): (usize, usize)) -> &mut T {
        assert!(lz < self.side && ly < self.side, "grid index out of range");
        &mut self.data[lz * self.side + ly]
    }
}
