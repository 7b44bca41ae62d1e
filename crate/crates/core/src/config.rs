//! JSON descriptors for models, fields and symbols, the run configuration
//! shared with the CLI, and binary tensor/matrix export.
//!
//! Field component indices `j`, `k` are 1-based in the JSON (matching the
//! coordinate indexing `B^{jk}` of the calculus) and validated as
//! `1 ≤ j < k ≤ n`; only the upper triangle is stored, the antisymmetric
//! completion is applied on load.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::MagneticField;
use crate::hull::{HullFunction, HullModel, OmegaGrid};
use crate::representation::KernelMatrix;
use crate::symbols::{Atom, GridSpec, Poly, Realization, SampledSymbol, Symbol};
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModeEntry {
    pub m: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HullFunctionDescriptor {
    pub modes: Vec<ModeEntry>,
}

impl HullFunctionDescriptor {
    pub fn resolve(&self, d: usize) -> Result<HullFunction> {
        HullFunction::from_modes(
            d,
            self.modes
                .iter()
                .map(|e| (e.m.clone(), C64::new(e.re, e.im))),
        )
    }

    pub fn from_function(f: &HullFunction) -> Self {
        HullFunctionDescriptor {
            modes: f
                .modes()
                .map(|(m, c)| ModeEntry {
                    m: m.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelDescriptor {
    pub d: usize,
    pub n: usize,
    /// Row-major d×n frequency matrix.
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
}

impl ModelDescriptor {
    pub fn resolve(&self) -> Result<HullModel> {
        HullModel::new(self.d, self.n, self.f.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldComponent {
    /// 1-based row index, `1 ≤ j < k`.
    pub j: usize,
    /// 1-based column index, `k ≤ n`.
    pub k: usize,
    pub modes: Vec<ModeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldDescriptor {
    pub components: Vec<FieldComponent>,
}

impl FieldDescriptor {
    pub fn resolve(&self, n: usize, d: usize) -> Result<MagneticField> {
        let mut upper = Vec::new();
        for comp in &self.components {
            if comp.j == 0 || comp.k == 0 || comp.j >= comp.k || comp.k > n {
                return Err(Error::config(format!(
                    "field component indices must satisfy 1 ≤ j < k ≤ n, got ({}, {})",
                    comp.j, comp.k
                )));
            }
            let f = HullFunctionDescriptor {
                modes: comp.modes.clone(),
            }
            .resolve(d)?;
            if !f.is_real_flagged() {
                return Err(Error::config(format!(
                    "field component ({}, {}) is not real-valued (needs conjugate-symmetric modes)",
                    comp.j, comp.k
                )));
            }
            upper.push(((comp.j - 1, comp.k - 1), f));
        }
        MagneticField::from_upper(n, d, upper)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolyTerm {
    pub k: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomDescriptor {
    pub hull: HullFunctionDescriptor,
    /// Polynomial envelope factor, degree ≤ 4; empty list means 1.
    #[serde(default)]
    pub poly: Vec<PolyTerm>,
    pub gamma: f64,
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymbolDescriptor {
    pub atoms: Vec<AtomDescriptor>,
    /// "X" (position, default) or "Xstar" (momentum).
    #[serde(default = "default_realization")]
    pub realization: String,
}

fn default_realization() -> String {
    "X".to_string()
}

impl SymbolDescriptor {
    pub fn resolve(&self, d: usize, n: usize) -> Result<Symbol> {
        let realization = match self.realization.as_str() {
            "X" => Realization::Position,
            "Xstar" => Realization::Momentum,
            other => {
                return Err(Error::config(format!(
                    "unknown realization {other:?} (expected \"X\" or \"Xstar\")"
                )))
            }
        };
        let mut atoms = Vec::new();
        for a in &self.atoms {
            if a.center.len() != n || a.momentum.len() != n {
                return Err(Error::config("atom center/momentum must have dim n"));
            }
            let poly = if a.poly.is_empty() {
                Poly::one(n)
            } else {
                for t in &a.poly {
                    if t.k.len() != n {
                        return Err(Error::config("poly multi-index must have dim n"));
                    }
                    if t.k.iter().sum::<u32>() > 4 {
                        return Err(Error::config("atom polynomial degree exceeds 4"));
                    }
                }
                Poly::from_terms(
                    n,
                    a.poly.iter().map(|t| (t.k.clone(), C64::new(t.re, t.im))),
                )
            };
            atoms.push(Atom::new(
                HullFunctionDescriptor {
                    modes: a.hull.modes.clone(),
                }
                .resolve(d)?,
                poly,
                a.gamma,
                a.center.clone(),
                a.momentum.clone(),
            )?);
        }
        Symbol::from_atoms(realization, atoms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridDescriptor {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub n: usize,
}

impl GridDescriptor {
    pub fn resolve(&self, realization: Realization) -> Result<GridSpec> {
        GridSpec::new(self.half_width, self.points, self.n, realization)
    }
}

/// The batch run configuration consumed by every CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub model: ModelDescriptor,
    pub field: FieldDescriptor,
    pub symbols: BTreeMap<String, SymbolDescriptor>,
    pub grid: GridDescriptor,
    /// ω-grid points per torus axis.
    pub omega_grid: usize,
    pub hbar_list: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

/// Validated, materialized configuration.
pub struct ResolvedConfig {
    pub model: HullModel,
    pub field: MagneticField,
    pub symbols: BTreeMap<String, Symbol>,
    pub grid: GridSpec,
    pub omega_grid: OmegaGrid,
    pub hbar_list: Vec<f64>,
    pub seed: u64,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let model = self.model.resolve()?;
        let d = model.torus_dim();
        let n = model.action_dim();
        if self.grid.n != n {
            return Err(Error::config("grid dimension must equal the action dim n"));
        }
        let field = self.field.resolve(n, d)?;
        let mut symbols = BTreeMap::new();
        for (name, desc) in &self.symbols {
            symbols.insert(name.clone(), desc.resolve(d, n)?);
        }
        if self.hbar_list.is_empty() {
            return Err(Error::config("hbar_list must be non-empty"));
        }
        for &h in &self.hbar_list {
            if !(h > 0.0 && h <= 1.0) {
                return Err(Error::config(format!("ħ = {h} outside (0, 1]")));
            }
        }
        if self.omega_grid == 0 {
            return Err(Error::config("omega_grid must be positive"));
        }
        Ok(ResolvedConfig {
            model,
            field,
            symbols,
            grid: self.grid.resolve(Realization::Position)?,
            omega_grid: OmegaGrid::new(d, self.omega_grid)?,
            hbar_list: self.hbar_list.clone(),
            seed: self.seed,
            output: self.output.clone(),
        })
    }

    pub fn symbol(&self, resolved: &ResolvedConfig, name: &str) -> Result<Symbol> {
        resolved
            .symbols
            .get(name)
            .cloned()
            .ok_or_else(|| Error::config(format!("symbol {name:?} not found in config")))
    }
}

/// Header for the binary complex tensor format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorHeader {
    pub dims: Vec<usize>,
    pub grid: Option<GridSpec>,
    pub provenance_tol: f64,
    pub hbar: Option<f64>,
    pub omega: Option<Vec<f64>>,
    pub modes: Option<Vec<Vec<i32>>>,
    pub data_file: String,
}

/// Write complex data as little-endian interleaved f64 pairs plus a JSON
/// header (`<prefix>.json` / `<prefix>.bin`).
pub fn write_complex_binary(prefix: &Path, header: &TensorHeader, data: &[C64]) -> Result<()> {
    let bin_path = prefix.with_extension("bin");
    let json_path = prefix.with_extension("json");
    let mut buf = Vec::with_capacity(data.len() * 16);
    for c in data {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::write(&bin_path, buf)
        .map_err(|e| Error::config(format!("write {}: {e}", bin_path.display())))?;
    let mut h = header.clone();
    h.data_file = bin_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut f = std::fs::File::create(&json_path)
        .map_err(|e| Error::config(format!("create {}: {e}", json_path.display())))?;
    f.write_all(serde_json::to_string_pretty(&h).expect("header serializes").as_bytes())
        .map_err(|e| Error::config(format!("write {}: {e}", json_path.display())))?;
    Ok(())
}

/// Export a sampled symbol (mode×grid tensor).
pub fn export_sampled_symbol(prefix: &Path, s: &SampledSymbol) -> Result<()> {
    let npts = s.grid.len();
    let mut data = Vec::with_capacity(s.modes().len() * npts);
    for mi in 0..s.modes().len() {
        data.extend_from_slice(s.mode_slice(mi));
    }
    write_complex_binary(
        prefix,
        &TensorHeader {
            dims: vec![s.modes().len(), npts],
            grid: Some(s.grid),
            provenance_tol: s.provenance_tol,
            hbar: None,
            omega: None,
            modes: Some(s.modes().to_vec()),
            data_file: String::new(),
        },
        &data,
    )
}

/// Export a kernel matrix (row-major complex).
pub fn export_kernel_matrix(prefix: &Path, m: &KernelMatrix) -> Result<()> {
    write_complex_binary(
        prefix,
        &TensorHeader {
            dims: vec![m.dim(), m.dim()],
            grid: Some(m.grid),
            provenance_tol: m.provenance_tol,
            hbar: Some(m.hbar),
            omega: Some(m.omega.angles().to_vec()),
            modes: None,
            data_file: String::new(),
        },
        &m.entries,
    )
}

/// The quasi-periodic reference configuration exercised throughout the
/// test suite: `d = n = 2`, `F = I`, `B^{12} = cos ω₁`, two Gaussian
/// symbols with nonzero hull modes and momenta.
pub fn reference_config() -> RunConfig {
    let cos_mode = |amp: f64| HullFunctionDescriptor {
        modes: vec![
            ModeEntry {
                m: vec![1, 0],
                re: amp / 2.0,
                im: 0.0,
            },
            ModeEntry {
                m: vec![-1, 0],
                re: amp / 2.0,
                im: 0.0,
            },
        ],
    };
    let mut symbols = BTreeMap::new();
    symbols.insert(
        "phi".to_string(),
        SymbolDescriptor {
            atoms: vec![AtomDescriptor {
                hull: HullFunctionDescriptor {
                    modes: vec![
                        ModeEntry {
                            m: vec![0, 0],
                            re: 1.0,
                            im: 0.0,
                        },
                        ModeEntry {
                            m: vec![1, 0],
                            re: 0.15,
                            im: 0.0,
                        },
                        ModeEntry {
                            m: vec![-1, 0],
                            re: 0.15,
                            im: 0.0,
                        },
                    ],
                },
                poly: vec![],
                gamma: 0.5,
                center: vec![0.0, 0.0],
                momentum: vec![0.4, 0.0],
            }],
            realization: "X".to_string(),
        },
    );
    symbols.insert(
        "psi".to_string(),
        SymbolDescriptor {
            atoms: vec![AtomDescriptor {
                hull: HullFunctionDescriptor {
                    modes: vec![
                        ModeEntry {
                            m: vec![0, 0],
                            re: 1.0,
                            im: 0.0,
                        },
                        ModeEntry {
                            m: vec![0, 1],
                            re: 0.1,
                            im: 0.05,
                        },
                        ModeEntry {
                            m: vec![0, -1],
                            re: 0.1,
                            im: -0.05,
                        },
                    ],
                },
                poly: vec![],
                gamma: 0.6,
                center: vec![0.3, -0.2],
                momentum: vec![0.0, 0.3],
            }],
            realization: "X".to_string(),
        },
    );
    RunConfig {
        model: ModelDescriptor {
            d: 2,
            n: 2,
            f: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        },
        field: FieldDescriptor {
            components: vec![FieldComponent {
                j: 1,
                k: 2,
                modes: cos_mode(1.0).modes,
            }],
        },
        symbols,
        grid: GridDescriptor {
            half_width: 8.0,
            points: 16,
            n: 2,
        },
        omega_grid: 16,
        hbar_list: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
        seed: 7,
        output: None,
    }
}
