use std::collections::HashMap;

use ndarray::{ArrayView1, ArrayView2, ArrayView3, ArrayViewMut1, ArrayViewMut2, ArrayViewMut3};

use crate::error::{Error, Result};

/// Handle to one entry of a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Buffers (batch-norm running statistics) are stored and checkpointed
    /// but never updated by the optimizer.
    pub trainable: bool,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named arrays with gradient accumulators and Adam moment buffers.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: Vec<ParamEntry>,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    pub(crate) first_moment: Vec<Vec<f64>>,
    pub(crate) second_moment: Vec<Vec<f64>>,
    by_name: HashMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        values: Vec<f64>,
        trainable: bool,
    ) -> Result<ParamId> {
        let name = name.into();
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "parameter {name}: {} values for shape {shape:?}",
                values.len()
            )));
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name}")));
        }
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.clone(), id);
        self.entries.push(ParamEntry {
            name,
            shape: shape.to_vec(),
            trainable,
        });
        self.values.push(values);
        self.grads.push(vec![0.0; len]);
        self.first_moment.push(vec![0.0; len]);
        self.second_moment.push(vec![0.0; len]);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Total trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(ParamEntry::len)
            .sum()
    }

    pub fn values_view(&self) -> Values<'_> {
        Values {
            entries: &self.entries,
            values: &self.values,
        }
    }

    /// Parameter values alongside mutable gradient accumulators.
    pub fn split_mut(&mut self) -> (Values<'_>, Grads<'_>) {
        (
            Values {
                entries: &self.entries,
                values: &self.values,
            },
            Grads {
                entries: &self.entries,
                grads: &mut self.grads,
            },
        )
    }

    pub(crate) fn moments_mut(&mut self) -> MomentsMut<'_> {
        MomentsMut {
            entries: &self.entries,
            values: &mut self.values,
            grads: &self.grads,
            first: &mut self.first_moment,
            second: &mut self.second_moment,
        }
    }
}

#[derive(Clone, Copy)]
pub struct Values<'a> {
    entries: &'a [ParamEntry],
    values: &'a [Vec<f64>],
}

impl<'a> Values<'a> {
    pub fn raw(&self, id: ParamId) -> &'a [f64] {
        &self.values[id.0]
    }

    pub fn view1(&self, id: ParamId) -> ArrayView1<'a, f64> {
        ArrayView1::from(&self.values[id.0][..])
    }

    pub fn view2(&self, id: ParamId) -> ArrayView2<'a, f64> {
        let s = &self.entries[id.0].shape;
        ArrayView2::from_shape((s[0], s[1]), &self.values[id.0]).expect("rank-2 parameter")
    }

    pub fn view3(&self, id: ParamId) -> ArrayView3<'a, f64> {
        let s = &self.entries[id.0].shape;
        ArrayView3::from_shape((s[0], s[1], s[2]), &self.values[id.0]).expect("rank-3 parameter")
    }
}

pub struct Grads<'a> {
    entries: &'a [ParamEntry],
    grads: &'a mut [Vec<f64>],
}

impl Grads<'_> {
    pub fn view1_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, f64> {
        ArrayViewMut1::from(&mut self.grads[id.0][..])
    }

    pub fn view2_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, f64> {
        let s = &self.entries[id.0].shape;
        ArrayViewMut2::from_shape((s[0], s[1]), &mut self.grads[id.0]).expect("rank-2 parameter")
    }

    pub fn view3_mut(&mut self, id: ParamId) -> ArrayViewMut3<'_, f64> {
        let s = &self.entries[id.0].shape;
        ArrayViewMut3::from_shape((s[0], s[1], s[2]), &mut self.grads[id.0])
            .expect("rank-3 parameter")
    }
}

pub(crate) struct MomentsMut<'a> {
    pub entries: &'a [ParamEntry],
    pub values: &'a mut [Vec<f64>],
    pub grads: &'a [Vec<f64>],
    pub first: &'a mut [Vec<f64>],
    pub second: &'a mut [Vec<f64>],
}
