use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::SystemLayout;

/// Assignment of layout systems to the parties A, B (the condition) and C.
/// Systems named in none of the three are ignored (traced out).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parties {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
}

impl Default for Parties {
    fn default() -> Self {
        Self::new(&["A"], &["B"], &["C"])
    }
}

impl Parties {
    pub fn new(a: &[&str], b: &[&str], c: &[&str]) -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self { a: own(a), b: own(b), c: own(c) }
    }

    /// Bipartite A|C with an empty condition.
    pub fn bipartite() -> Self {
        Self::new(&["A"], &[], &["C"])
    }

    /// A|B|C when the layout has a system named B, A|C otherwise.
    pub fn infer(layout: &SystemLayout) -> Self {
        if layout.contains("B") {
            Self::default()
        } else {
            Self::bipartite()
        }
    }

    /// Check the parties are disjoint, nonempty on A and C, and present.
    pub fn validate(&self, layout: &SystemLayout) -> Result<()> {
        if self.a.is_empty() || self.c.is_empty() {
            return Err(Error::InvalidLayout("parties A and C must be nonempty".into()));
        }
        layout.indices_of(&self.all()).map(|_| ())
    }

    pub fn all(&self) -> Vec<String> {
        let mut v = self.a.clone();
        v.extend(self.b.iter().cloned());
        v.extend(self.c.iter().cloned());
        v
    }

    pub fn dim_a(&self, layout: &SystemLayout) -> Result<usize> {
        layout.dim_of_set(&self.a)
    }

    pub fn dim_b(&self, layout: &SystemLayout) -> Result<usize> {
        layout.dim_of_set(&self.b)
    }

    pub fn dim_c(&self, layout: &SystemLayout) -> Result<usize> {
        layout.dim_of_set(&self.c)
    }

    pub fn party_of(&self, system: &str) -> Option<char> {
        let has = |v: &Vec<String>| v.iter().any(|s| s == system);
        if has(&self.a) {
            Some('A')
        } else if has(&self.b) {
            Some('B')
        } else if has(&self.c) {
            Some('C')
        } else {
            None
        }
    }

    pub fn with_condition(&self, extra: &str) -> Self {
        let mut p = self.clone();
        p.b.push(extra.to_string());
        p
    }
}
