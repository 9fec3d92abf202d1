use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{Panel, Station};
use crate::error::{Error, Result};

const EARTH_RADIUS_KM: f64 = 6371.0;

/// Projects lon/lat degrees to planar km with one equirectangular
/// projection centred on the centroid of the points.
pub fn project_equirectangular(lon_lat: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if lon_lat.is_empty() {
        return Vec::new();
    }
    let n = lon_lat.len() as f64;
    let lon0 = lon_lat.iter().map(|p| p.0).sum::<f64>() / n;
    let lat0 = lon_lat.iter().map(|p| p.1).sum::<f64>() / n;
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let coslat = lat0.to_radians().cos();
    lon_lat
        .iter()
        .map(|&(lon, lat)| ((lon - lon0) * coslat * k, (lat - lat0) * k))
        .collect()
}

fn ingest_err(file: &Path, message: impl Into<String>) -> Error {
    Error::Ingest {
        file: file.display().to_string(),
        message: message.into(),
    }
}

fn open(file: &Path) -> Result<csv::Reader<std::fs::File>> {
    let f = std::fs::File::open(file).map_err(|e| Error::io(file, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn column(headers: &csv::StringRecord, name: &str, file: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| ingest_err(file, format!("missing column `{name}`")))
}

fn parse_value(raw: &str, file: &Path, line: u64) -> Result<Option<f64>> {
    if raw.is_empty() || raw == "NA" {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| ingest_err(file, format!("line {line}: cannot parse `{raw}` as a number")))
}

fn parse_date(raw: &str, file: &Path, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| ingest_err(file, format!("line {line}: invalid ISO-8601 date `{raw}`")))
}

fn read_stations(file: &Path) -> Result<Vec<Station>> {
    let mut rdr = open(file)?;
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "id", file)?;
    let planar = headers.iter().any(|h| h.eq_ignore_ascii_case("x"));
    let (c1, c2) = if planar {
        (column(&headers, "x", file)?, column(&headers, "y", file)?)
    } else {
        (column(&headers, "lon", file)?, column(&headers, "lat", file)?)
    };
    let extra: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col && *i != c1 && *i != c2)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut stations = Vec::new();
    let mut coords = Vec::new();
    let mut ids = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[id_col].to_string();
        if !ids.insert(id.clone()) {
            return Err(ingest_err(file, format!("duplicate station id `{id}`")));
        }
        let a = parse_value(&rec[c1], file, line)?;
        let b = parse_value(&rec[c2], file, line)?;
        let (Some(a), Some(b)) = (a, b) else {
            return Err(ingest_err(file, format!("station `{id}` lacks coordinates")));
        };
        let mut statics = BTreeMap::new();
        for (i, name) in &extra {
            if let Some(v) = parse_value(&rec[*i], file, line)? {
                statics.insert(name.clone(), v);
            }
        }
        coords.push((a, b));
        stations.push(Station {
            id,
            x: a,
            y: b,
            static_covariates: statics,
        });
    }
    if !planar {
        for (st, (x, y)) in stations.iter_mut().zip(project_equirectangular(&coords)) {
            st.x = x;
            st.y = y;
        }
    }
    Ok(stations)
}

struct LongRecord {
    station: String,
    date: NaiveDate,
    name: Option<String>,
    value: Option<f64>,
    line: u64,
}

fn read_long(file: &Path, with_name: bool) -> Result<Vec<LongRecord>> {
    let mut rdr = open(file)?;
    let headers = rdr.headers()?.clone();
    let sc = column(&headers, "station_id", file)?;
    let tc = column(&headers, "timestamp", file)?;
    let vc = column(&headers, "value", file)?;
    let nc = if with_name { Some(column(&headers, "name", file)?) } else { None };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(LongRecord {
            station: rec[sc].to_string(),
            date: parse_date(&rec[tc], file, line)?,
            name: nc.map(|c| rec[c].to_string()),
            value: parse_value(&rec[vc], file, line)?,
            line,
        });
    }
    Ok(out)
}

/// Reads a panel from three CSV files.
///
/// * stations: `id,x,y[,static...]` (planar km) or `id,lon,lat[,static...]`
///   (degrees, projected equirectangularly about the centroid);
/// * observations: long format `station_id,timestamp,value`;
/// * covariates: long format `station_id,timestamp,name,value`.
///
/// Missing markers are empty fields or `NA`. Covariates must be complete.
pub fn ingest_csv(
    stations_file: impl AsRef<Path>,
    observations_file: impl AsRef<Path>,
    covariates_file: impl AsRef<Path>,
) -> Result<Panel> {
    let (sf, of, cf) = (
        stations_file.as_ref(),
        observations_file.as_ref(),
        covariates_file.as_ref(),
    );
    let stations = read_stations(sf)?;
    let index: HashMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let obs = read_long(of, false)?;
    let covs = read_long(cf, true)?;

    let dates: BTreeSet<NaiveDate> = obs.iter().chain(covs.iter()).map(|r| r.date).collect();
    let timeline: Vec<NaiveDate> = dates.into_iter().collect();
    let t_index: HashMap<NaiveDate, usize> =
        timeline.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let (n, tau) = (stations.len(), timeline.len());

    let mut observations = DMatrix::from_element(n, tau, f64::NAN);
    let mut seen = HashSet::new();
    for r in &obs {
        let s = *index
            .get(r.station.as_str())
            .ok_or_else(|| Error::UnknownStation(r.station.clone()))?;
        let t = t_index[&r.date];
        if !seen.insert((s, t)) {
            return Err(Error::Duplicate {
                station: r.station.clone(),
                timestamp: r.date.to_string(),
            });
        }
        if let Some(v) = r.value {
            observations[(s, t)] = v;
        }
    }

    let mut names: Vec<String> = Vec::new();
    let mut matrices: Vec<DMatrix<f64>> = Vec::new();
    let mut seen = HashSet::new();
    for r in &covs {
        let s = *index
            .get(r.station.as_str())
            .ok_or_else(|| Error::UnknownStation(r.station.clone()))?;
        let name = r.name.clone().unwrap_or_default();
        let k = match names.iter().position(|n| *n == name) {
            Some(k) => k,
            None => {
                names.push(name.clone());
                matrices.push(DMatrix::from_element(n, tau, f64::NAN));
                names.len() - 1
            }
        };
        let t = t_index[&r.date];
        if !seen.insert((s, t, k)) {
            return Err(Error::Duplicate {
                station: r.station.clone(),
                timestamp: format!("{} (covariate `{name}`)", r.date),
            });
        }
        let v = r.value.ok_or_else(|| {
            ingest_err(cf, format!("line {}: missing covariate value", r.line))
        })?;
        matrices[k][(s, t)] = v;
    }

    Panel::new(stations, timeline, observations, matrices, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_centred() {
        let p = project_equirectangular(&[(9.0, 45.0), (10.0, 45.0)]);
        assert!((p[0].0 + p[1].0).abs() < 1e-9);
        // one degree of longitude at 45N is about 78.6 km
        assert!((p[1].0 - p[0].0 - 78.63).abs() < 0.05);
        assert_eq!(p[0].1, 0.0);
    }
}
