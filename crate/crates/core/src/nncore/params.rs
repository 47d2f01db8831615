//! Ordered, named parameter storage shared by the models and the
//! optimizer. Order is fixed at construction and defines the gradient
//! layout and the checkpoint layout.

/// One named tensor of trainable values.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        let name = name.into();
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape/value mismatch for {name}"
        );
        assert!(self.index_of(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Param { name, shape, values });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn get(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param {
        &mut self.params[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn by_name(&self, name: &str) -> &Param {
        let i = self
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        &self.params[i]
    }

    /// Per-parameter zero buffers matching the value layout.
    pub fn zeros_like(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.values.len()]).collect()
    }
}
