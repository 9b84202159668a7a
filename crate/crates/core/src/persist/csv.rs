//! Hand-rolled CSV writers/readers for parameter sets and result tables.
//! Floats use shortest round-trip scientific notation.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::PersistError;
use crate::hifi::{
    coefficients_from_macros, AssemblyMaterial, MacroParameters, ParameterPoint,
    SubdomainCoefficients,
};

pub const RAW_PARAM_HEADER: &str =
    "mu_id,subdomain,d1,sigma11,sigma12,d2,sigma21,sigma22,g1,g2,g3,g4";
pub const MACRO_PARAM_HEADER: &str =
    "mu_id,subdomain,material,burnup_mwd_per_ton,fuel_temperature_k,boron_ppm,moderator_density";

pub fn write_table(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), PersistError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Dense matrix as plain CSV, one row per line, shortest round-trip values.
pub fn write_dense_csv(path: &Path, m: &faer::Mat<f64>) -> Result<(), PersistError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_dense_csv(path: &Path) -> Result<faer::Mat<f64>, PersistError> {
    let file = std::fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let row: Vec<f64> = t
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| PersistError::Format(format!("{}: {e}", path.display())))
            })
            .collect::<Result<_, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(PersistError::Format(format!(
                    "{}: ragged rows",
                    path.display()
                )));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(faer::Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn material_name(m: AssemblyMaterial) -> &'static str {
    match m {
        AssemblyMaterial::Ugd12 => "ugd12",
        AssemblyMaterial::Uo2 => "uo2",
        AssemblyMaterial::Reflector => "reflector",
    }
}

fn material_from(name: &str) -> Result<AssemblyMaterial, PersistError> {
    match name {
        "ugd12" => Ok(AssemblyMaterial::Ugd12),
        "uo2" => Ok(AssemblyMaterial::Uo2),
        "reflector" => Ok(AssemblyMaterial::Reflector),
        other => Err(PersistError::Format(format!("unknown material {other}"))),
    }
}

/// One row per `(mu, subdomain)`; macro-parameter sets are written in their
/// macro form, raw sets as plain coefficients.
pub fn write_parameters(path: &Path, params: &[ParameterPoint]) -> Result<(), PersistError> {
    let as_macro = params.iter().all(|p| p.macros.is_some()) && !params.is_empty();
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    if as_macro {
        writeln!(w, "{MACRO_PARAM_HEADER}")?;
        for (id, p) in params.iter().enumerate() {
            for (k, m) in p.macros.as_ref().unwrap().iter().enumerate() {
                writeln!(
                    w,
                    "{id},{k},{},{:e},{:e},{:e},{:e}",
                    material_name(m.material),
                    m.burnup_mwd_per_ton,
                    m.fuel_temperature_k,
                    m.boron_ppm,
                    m.moderator_density
                )?;
            }
        }
    } else {
        writeln!(w, "{RAW_PARAM_HEADER}")?;
        for (id, p) in params.iter().enumerate() {
            for (k, sd) in p.subdomains.iter().enumerate() {
                let f = sd.f.map(fmt_f64).join(",");
                let g = sd.g.map(fmt_f64).join(",");
                writeln!(w, "{id},{k},{f},{g}")?;
            }
        }
    }
    Ok(())
}

/// Reads either parameter format, dispatching on the header row.
pub fn read_parameters(path: &Path) -> Result<Vec<ParameterPoint>, PersistError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| PersistError::Format(format!("{}: empty file", path.display())))??;
    let header = header.trim();
    let is_macro = header == MACRO_PARAM_HEADER;
    if !is_macro && header != RAW_PARAM_HEADER {
        return Err(PersistError::Format(format!(
            "{}: unrecognized parameter header",
            path.display()
        )));
    }

    struct Partial {
        coeffs: Vec<(usize, SubdomainCoefficients)>,
        macros: Vec<(usize, MacroParameters)>,
    }
    let mut per_mu: Vec<(usize, Partial)> = Vec::new();

    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        let expect = if is_macro { 7 } else { 12 };
        if fields.len() != expect {
            return Err(PersistError::Format(format!(
                "{}: expected {expect} fields, got {}",
                path.display(),
                fields.len()
            )));
        }
        let mu_id: usize = fields[0]
            .parse()
            .map_err(|e| PersistError::Format(format!("mu_id: {e}")))?;
        let sub: usize = fields[1]
            .parse()
            .map_err(|e| PersistError::Format(format!("subdomain: {e}")))?;
        let slot = match per_mu.iter_mut().find(|(id, _)| *id == mu_id) {
            Some((_, p)) => p,
            None => {
                per_mu.push((
                    mu_id,
                    Partial {
                        coeffs: Vec::new(),
                        macros: Vec::new(),
                    },
                ));
                &mut per_mu.last_mut().unwrap().1
            }
        };
        if is_macro {
            let parse = |s: &str| -> Result<f64, PersistError> {
                s.parse()
                    .map_err(|e| PersistError::Format(format!("macro value: {e}")))
            };
            let m = MacroParameters {
                material: material_from(fields[2])?,
                burnup_mwd_per_ton: parse(fields[3])?,
                fuel_temperature_k: parse(fields[4])?,
                boron_ppm: parse(fields[5])?,
                moderator_density: parse(fields[6])?,
            };
            slot.macros.push((sub, m));
        } else {
            let mut vals = [0.0f64; 10];
            for (i, f) in fields[2..].iter().enumerate() {
                vals[i] = f
                    .parse()
                    .map_err(|e| PersistError::Format(format!("coefficient: {e}")))?;
            }
            slot.coeffs.push((
                sub,
                SubdomainCoefficients {
                    f: vals[0..6].try_into().unwrap(),
                    g: vals[6..10].try_into().unwrap(),
                },
            ));
        }
    }

    per_mu.sort_by_key(|(id, _)| *id);
    let mut out = Vec::with_capacity(per_mu.len());
    for (_, mut partial) in per_mu {
        if is_macro {
            partial.macros.sort_by_key(|(k, _)| *k);
            let macros: Vec<MacroParameters> = partial.macros.into_iter().map(|(_, m)| m).collect();
            let subdomains = macros.iter().map(coefficients_from_macros).collect();
            out.push(ParameterPoint {
                subdomains,
                macros: Some(macros),
            });
        } else {
            partial.coeffs.sort_by_key(|(k, _)| *k);
            out.push(ParameterPoint {
                subdomains: partial.coeffs.into_iter().map(|(_, c)| c).collect(),
                macros: None,
            });
        }
    }
    Ok(out)
}
