use serde::{Deserialize, Serialize};

use super::NnError;

/// One dense layer: `weight` is `rows × cols` row-major, mapping `cols` inputs to `rows` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn new(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, NnError> {
        let name = name.into();
        if rows == 0 || cols == 0 || weight.len() != rows * cols || bias.len() != rows {
            return Err(NnError::Dimension {
                layer: name,
                detail: format!(
                    "{rows}x{cols} layer with {} weights and {} biases",
                    weight.len(),
                    bias.len()
                ),
            });
        }
        Ok(Self { name, rows, cols, weight, bias })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.rows
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// `out = W x + b`, written into `out`.
    #[inline]
    pub fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            *o = self.bias[r] + dot(row, x);
        }
    }

    fn all_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ordered collection of named dense layers making up one network.
///
/// This is the unit that gets serialized, transplanted between networks and
/// updated by the optimizer. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamStore {
    layers: Vec<Layer>,
}

impl ParamStore {
    /// Builds a store, checking that consecutive layers chain and every entry is finite.
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let store = Self { layers };
        store.validate()?;
        Ok(store)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let mut seen = std::collections::BTreeSet::new();
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.rows == 0
                || layer.cols == 0
                || layer.weight.len() != layer.rows * layer.cols
                || layer.bias.len() != layer.rows
            {
                return Err(NnError::Dimension {
                    layer: layer.name.clone(),
                    detail: "weight/bias storage disagrees with declared shape".into(),
                });
            }
            if !seen.insert(layer.name.as_str()) {
                return Err(NnError::DuplicateLayer(layer.name.clone()));
            }
            if k > 0 {
                let prev = &self.layers[k - 1];
                if prev.rows != layer.cols {
                    return Err(NnError::Dimension {
                        layer: layer.name.clone(),
                        detail: format!(
                            "expects {} inputs but previous layer `{}` emits {}",
                            layer.cols, prev.name, prev.rows
                        ),
                    });
                }
            }
            if !layer.all_finite() {
                return Err(NnError::NonFinite(layer.name.clone()));
            }
        }
        Ok(())
    }

    /// Gradient buffer with the same shapes and names, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.name.clone(), l.rows, l.cols))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Layer widths, input first: `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            dims.push(first.cols);
        }
        dims.extend(self.layers.iter().map(|l| l.rows));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn fill_zero(&mut self) {
        for layer in &mut self.layers {
            layer.weight.iter_mut().for_each(|v| *v = 0.0);
            layer.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    /// `self += other`, shapes assumed identical.
    pub fn add_assign(&mut self, other: &ParamStore) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Contiguous sub-range of layers as a standalone store.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ParamStore {
        ParamStore { layers: self.layers[range].to_vec() }
    }

    /// Polyak averaging: `self ← (1 − tau)·self + tau·source`.
    pub fn soft_update_from(&mut self, source: &ParamStore, tau: f64) {
        for (t, s) in self.values_mut().zip(source.values()) {
            *t = (1.0 - tau) * *t + tau * s;
        }
    }

    /// Euclidean distance between two same-shaped stores.
    pub fn distance(&self, other: &ParamStore) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Rounds every entry to the nearest `f32`, the precision of the parameter file.
    pub fn round_to_f32(&mut self) {
        for v in self.values_mut() {
            *v = *v as f32 as f64;
        }
    }

    pub(crate) fn from_layers_unchecked(layers: Vec<Layer>) -> Self {
        Self { layers }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_chaining_layers() {
        let err = ParamStore::new(vec![Layer::zeros("a", 3, 2), Layer::zeros("b", 1, 4)]).unwrap_err();
        match err {
            NnError::Dimension { layer, .. } => assert_eq!(layer, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut l = Layer::zeros("a", 1, 1);
        l.weight[0] = f64::NAN;
        assert!(matches!(ParamStore::new(vec![l]), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn dims_and_counts() {
        let p = ParamStore::new(vec![Layer::zeros("a", 8, 4), Layer::zeros("b", 1, 8)]).unwrap();
        assert_eq!(p.dims(), vec![4, 8, 1]);
        assert_eq!(p.num_params(), 8 * 4 + 8 + 8 + 1);
    }

    #[test]
    fn soft_update_limits() {
        let mut a = ParamStore::new(vec![Layer::new("a", 1, 2, vec![1.0, 2.0], vec![3.0]).unwrap()]).unwrap();
        let b = ParamStore::new(vec![Layer::new("a", 1, 2, vec![5.0, 6.0], vec![7.0]).unwrap()]).unwrap();
        let keep = a.clone();
        a.soft_update_from(&b, 0.0);
        assert_eq!(a, keep);
        a.soft_update_from(&b, 1.0);
        assert_eq!(a, b);
    }
}
