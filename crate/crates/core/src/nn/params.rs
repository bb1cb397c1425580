use std::ops::Range;

use crate::error::{Error, Result};

/// Dense layer descriptor: `outputs x inputs` row-major weights, then an
/// optional bias of length `outputs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub has_bias: bool,
}

impl LayerShape {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            has_bias: true,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs * self.outputs + if self.has_bias { self.outputs } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat model parameters with layer-shape metadata.
///
/// This is the unit exchanged in federated rounds and the object every attack
/// and defense manipulates. Arithmetic helpers return new vectors and check
/// that shapes agree.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shapes: Vec<LayerShape>,
    id: String,
}

impl ParamVector {
    pub fn zeros(shapes: &[LayerShape]) -> Self {
        let n = shapes.iter().map(LayerShape::len).sum();
        Self {
            values: vec![0.0; n],
            shapes: shapes.to_vec(),
            id: String::new(),
        }
    }

    pub fn from_values(shapes: &[LayerShape], values: Vec<f64>) -> Result<Self> {
        let expected: usize = shapes.iter().map(LayerShape::len).sum();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for layers expecting {expected}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            shapes: shapes.to_vec(),
            id: String::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_shape(&self, other: &ParamVector) -> bool {
        self.shapes == other.shapes
    }

    pub fn check_shape(&self, other: &ParamVector) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "parameter layouts differ ({} vs {} values)",
                self.len(),
                other.len()
            )))
        }
    }

    /// Index range of layer `layer` inside the flat vector.
    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        let start: usize = self.shapes[..layer].iter().map(LayerShape::len).sum();
        start..start + self.shapes[layer].len()
    }

    /// Weights and bias of the final layer.
    pub fn output_layer_range(&self) -> Range<usize> {
        self.layer_range(self.shapes.len() - 1)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> ParamVector {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &ParamVector) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Coordinatewise arithmetic mean, summed in the given order.
    pub fn mean<'a, I>(vectors: I) -> Result<ParamVector>
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Precondition("mean of zero vectors".into()))?;
        let mut acc = first.values.clone();
        let mut count = 1usize;
        for v in iter {
            first.check_shape(v)?;
            for (a, b) in acc.iter_mut().zip(&v.values) {
                *a += b;
            }
            count += 1;
        }
        let n = count as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(ParamVector {
            values: acc,
            shapes: first.shapes.clone(),
            id: String::new(),
        })
    }

    fn zip_with(&self, other: &ParamVector, f: impl Fn(f64, f64) -> f64) -> Result<ParamVector> {
        self.check_shape(other)?;
        Ok(ParamVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            shapes: self.shapes.clone(),
            id: self.id.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shapes() -> Vec<LayerShape> {
        vec![LayerShape::dense(2, 3), LayerShape::dense(3, 1)]
    }

    #[test]
    fn length_follows_layer_shapes() {
        let p = ParamVector::zeros(&shapes());
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        assert_eq!(p.output_layer_range(), 9..13);
        assert!(ParamVector::from_values(&shapes(), vec![0.0; 12]).is_err());
    }

    #[test]
    fn mean_of_identical_copies_is_exact() {
        let values: Vec<f64> = (0..13).map(|i| (i as f64) * 0.1 - 0.37).collect();
        let p = ParamVector::from_values(&shapes(), values).unwrap();
        let copies = vec![p.clone(); 7];
        let m = ParamVector::mean(&copies).unwrap();
        for (a, b) in m.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = ParamVector::zeros(&shapes());
        let b = ParamVector::zeros(&[LayerShape::dense(2, 4), LayerShape::dense(4, 1)]);
        assert!(a.add(&b).is_err());
        assert!(ParamVector::mean([&a, &b]).is_err());
    }
}
