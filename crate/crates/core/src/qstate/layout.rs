use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named subsystem and its Hilbert-space dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct System {
    pub name: String,
    pub dim: usize,
}

/// Ordered, uniquely named subsystems. The tensor basis of every matrix bound
/// to a layout is lexicographic in this order (first system most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemLayout {
    systems: Vec<System>,
    total_dim: usize,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(systems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let systems: Vec<System> = systems
            .into_iter()
            .map(|(n, d)| System { name: n.into(), dim: d })
            .collect();
        Self::from_systems(systems)
    }

    pub fn from_systems(systems: Vec<System>) -> Result<Self> {
        for (i, s) in systems.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::InvalidLayout("empty system name".into()));
            }
            if s.dim == 0 {
                return Err(Error::InvalidLayout(format!("system {:?} has dimension 0", s.name)));
            }
            if systems[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::NameCollision(s.name.clone()));
            }
        }
        let total_dim = systems.iter().map(|s| s.dim).product();
        Ok(Self { systems, total_dim })
    }

    /// Single-system layout.
    pub fn single(name: &str, dim: usize) -> Result<Self> {
        Self::new([(name, dim)])
    }

    /// The empty layout (dimension 1).
    pub fn empty() -> Self {
        Self { systems: Vec::new(), total_dim: 1 }
    }

    pub fn systems(&self) -> &[System] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.systems.iter().any(|s| s.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.systems
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        Ok(self.systems[self.index_of(name)?].dim)
    }

    /// Axis indices of the named systems, in the order given.
    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let i = self.index_of(n.as_ref())?;
            if out.contains(&i) {
                return Err(Error::Overlap(format!("system {:?} listed twice", n.as_ref())));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Product of the dimensions of the named systems.
    pub fn dim_of_set<S: AsRef<str>>(&self, names: &[S]) -> Result<usize> {
        let idx = self.indices_of(names)?;
        Ok(idx.iter().map(|&i| self.systems[i].dim).product())
    }

    /// Sub-layout of the named systems in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = self.indices_of(names)?;
        Self::from_systems(idx.iter().map(|&i| self.systems[i].clone()).collect())
    }

    /// Sub-layout at the given axis indices.
    pub fn select_indices(&self, idx: &[usize]) -> Self {
        let systems: Vec<System> = idx.iter().map(|&i| self.systems[i].clone()).collect();
        let total_dim = systems.iter().map(|s| s.dim).product();
        Self { systems, total_dim }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut systems = self.systems.clone();
        systems.extend(other.systems.iter().cloned());
        Self::from_systems(systems)
    }

    /// Layout with one system appended.
    pub fn with(&self, name: &str, dim: usize) -> Result<Self> {
        self.concat(&Self::single(name, dim)?)
    }
}

impl std::fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.systems.iter().map(|s| format!("{}:{}", s.name, s.dim)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dim_is_product() {
        let l = SystemLayout::new([("A", 2), ("B", 3), ("C", 4)]).unwrap();
        assert_eq!(l.total_dim(), 24);
        assert_eq!(l.dim_of_set(&["C", "A"]).unwrap(), 8);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(matches!(SystemLayout::new([("A", 2), ("A", 2)]), Err(Error::NameCollision(_))));
        assert!(SystemLayout::new([("", 2)]).is_err());
        assert!(SystemLayout::new([("A", 0)]).is_err());
    }
}
