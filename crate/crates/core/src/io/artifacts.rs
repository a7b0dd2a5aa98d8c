//! JSON containers for bases, DEIM operators and trained networks. Floats go
//! through shortest round-trip formatting, so a save/load cycle is lossless
//! and identical models give identical bytes.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dynsys::FomSystem;
use crate::error::{Error, Result};
use crate::io::{atomic_write, read_artifact};
use crate::net::{DrRnn, DrRnnHyper, StandardRnn};
use crate::reduction::{build_deim_operator, DeimOperator, PodBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Column-major.
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for DenseMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        DenseMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl DenseMatrix {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::invalid(
                "matrix",
                format!("{} entries for a {}x{} matrix", self.data.len(), self.rows, self.cols),
            ));
        }
        Ok(DMatrix::from_column_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodArtifact {
    pub basis: DenseMatrix,
    pub singular_values: Vec<f64>,
}

impl PodArtifact {
    pub fn from_basis(basis: &PodBasis) -> Self {
        PodArtifact {
            basis: DenseMatrix::from(&basis.basis),
            singular_values: basis.singular_values.clone(),
        }
    }

    pub fn to_basis(&self) -> Result<PodBasis> {
        Ok(PodBasis {
            basis: self.basis.to_matrix()?,
            singular_values: self.singular_values.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeimArtifact {
    pub indices: Vec<usize>,
    /// `V_m`.
    pub nonlinearity_basis: DenseMatrix,
    pub condition: f64,
}

impl DeimArtifact {
    pub fn from_operator(op: &DeimOperator) -> Self {
        DeimArtifact {
            indices: op.indices.clone(),
            nonlinearity_basis: DenseMatrix::from(&op.nonlinearity_basis),
            condition: op.condition,
        }
    }

    /// Rebuilds the operator against a state basis.
    pub fn to_operator(&self, basis: &PodBasis) -> Result<DeimOperator> {
        build_deim_operator(&self.nonlinearity_basis.to_matrix()?, &self.indices, basis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelArtifact {
    DrRnn {
        dt: f64,
        w: Vec<f64>,
        eta: Vec<f64>,
        u: DenseMatrix,
        train_u: bool,
        hyper: DrRnnHyper,
    },
    Rnn {
        u: DenseMatrix,
        v: DenseMatrix,
        w: DenseMatrix,
    },
}

impl ModelArtifact {
    pub fn from_drrnn(model: &DrRnn) -> Self {
        ModelArtifact::DrRnn {
            dt: model.dt,
            w: model.w.as_slice().to_vec(),
            eta: model.eta.clone(),
            u: DenseMatrix::from(&model.u),
            train_u: model.train_u,
            hyper: model.hyper,
        }
    }

    pub fn from_rnn(model: &StandardRnn) -> Self {
        ModelArtifact::Rnn {
            u: DenseMatrix::from(&model.u),
            v: DenseMatrix::from(&model.v),
            w: DenseMatrix::from(&model.w),
        }
    }

    /// Rebuilds a DR-RNN bound to `system`.
    pub fn to_drrnn(&self, system: Arc<FomSystem>) -> Result<DrRnn> {
        let ModelArtifact::DrRnn {
            dt,
            w,
            eta,
            u,
            train_u,
            hyper,
        } = self
        else {
            return Err(Error::invalid("model", "file holds a standard RNN, not a DR-RNN"));
        };
        let mut model = DrRnn::new(system, eta.len() + 1, *dt)?
            .with_trainable_u(*train_u)
            .with_hyper(*hyper);
        model.w = DVector::from_vec(w.clone());
        model.eta = eta.clone();
        model.u = u.to_matrix()?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_rnn(&self) -> Result<StandardRnn> {
        let ModelArtifact::Rnn { u, v, w } = self else {
            return Err(Error::invalid("model", "file holds a DR-RNN, not a standard RNN"));
        };
        Ok(StandardRnn {
            u: u.to_matrix()?,
            v: v.to_matrix()?,
            w: w.to_matrix()?,
        })
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(value)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    atomic_write(path, &to_json_bytes(value)?)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_artifact(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{initialize_model, InitConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn drrnn_round_trip_is_exact() {
        let sys = Arc::new(FomSystem::new(DMatrix::from_element(2, 2, -0.5)).unwrap());
        let template = DrRnn::new(sys.clone(), 3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = initialize_model(&template, &InitConfig::rom(), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_json(&ModelArtifact::from_drrnn(&model), &path).unwrap();
        let back = load_json::<ModelArtifact>(&path).unwrap().to_drrnn(sys).unwrap();
        assert_eq!(back.w, model.w);
        assert_eq!(back.eta, model.eta);
        assert_eq!(back.u, model.u);
        assert_eq!(back.train_u, model.train_u);
        assert_eq!(
            to_json_bytes(&ModelArtifact::from_drrnn(&back)).unwrap(),
            std::fs::read(&path).unwrap()
        );
        assert!(load_json::<ModelArtifact>(&path).unwrap().to_rnn().is_err());
    }

    #[test]
    fn pod_round_trip() {
        let basis = PodBasis {
            basis: DMatrix::from_column_slice(3, 1, &[0.6, 0.8, 0.0]),
            singular_values: vec![2.0, 0.1, 1e-300],
        };
        let art = PodArtifact::from_basis(&basis);
        let json = to_json_bytes(&art).unwrap();
        let back: PodArtifact = serde_json::from_slice(&json).unwrap();
        let b = back.to_basis().unwrap();
        assert_eq!(b.basis, basis.basis);
        assert_eq!(b.singular_values, basis.singular_values);
    }

    #[test]
    fn bad_matrix_shape() {
        let m = DenseMatrix {
            rows: 2,
            cols: 2,
            data: vec![1.0],
        };
        assert!(m.to_matrix().is_err());
    }
}
