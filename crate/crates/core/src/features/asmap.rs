use super::{BandSelection, WindowedDeTensor};
use crate::error::{Error, Result};
use crate::signal::Band;

/// Pairwise DE differences for one window, stored band-major as
/// `[band][i][j]` so each band is one CNN input plane.
#[derive(Debug, Clone, PartialEq)]
pub struct AsMapTensor {
    pub n_channels: usize,
    pub band_names: Vec<String>,
    pub normalized: bool,
    values: Vec<f64>,
}

impl AsMapTensor {
    pub fn from_values(n_channels: usize, band_names: Vec<String>, normalized: bool, values: Vec<f64>) -> Result<Self> {
        let expected = band_names.len() * n_channels * n_channels;
        if values.len() != expected {
            return Err(Error::shape(
                format!("{}×{n_channels}×{n_channels} values", band_names.len()),
                format!("{}", values.len()),
            ));
        }
        Ok(Self { n_channels, band_names, normalized, values })
    }

    pub fn n_bands(&self) -> usize {
        self.band_names.len()
    }

    /// `[bands, channels, channels]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.n_bands(), self.n_channels, self.n_channels]
    }

    pub fn get(&self, i: usize, j: usize, band: usize) -> f64 {
        let n = self.n_channels;
        self.values[band * n * n + i * n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, band: usize) -> &[f64] {
        let nn = self.n_channels * self.n_channels;
        &self.values[band * nn..(band + 1) * nn]
    }

    /// Keeps the listed band planes, in the given order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<AsMapTensor> {
        let mut values = Vec::with_capacity(bands.len() * self.n_channels * self.n_channels);
        let mut names = Vec::with_capacity(bands.len());
        for &b in bands {
            if b >= self.n_bands() {
                return Err(Error::invalid(format!("band index {b} out of range for a {}-band AsMap", self.n_bands())));
            }
            values.extend_from_slice(self.slice(b));
            names.push(self.band_names[b].clone());
        }
        AsMapTensor::from_values(self.n_channels, names, self.normalized, values)
    }
}

/// Raw AsMap of one window: `A[i][j][k] = DE[i][k] − DE[j][k]` over the
/// selected bands. `window_de` is `[channel][band]`.
pub fn asmap(window_de: &[Vec<f64>], bands: &[Band], selection: &BandSelection) -> Result<AsMapTensor> {
    let n = window_de.len();
    if n < 2 {
        return Err(Error::invalid(format!("AsMap needs at least 2 channels, got {n}")));
    }
    if let Some(row) = window_de.iter().find(|r| r.len() != bands.len()) {
        return Err(Error::shape(format!("{} bands per channel", bands.len()), format!("{}", row.len())));
    }
    let selected = selection.indices(bands)?;
    let mut values = Vec::with_capacity(selected.len() * n * n);
    for &k in &selected {
        for row_i in window_de {
            for row_j in window_de {
                values.push(row_i[k] - row_j[k]);
            }
        }
    }
    AsMapTensor::from_values(n, selected.iter().map(|&k| bands[k].name.clone()).collect(), false, values)
}

impl WindowedDeTensor {
    /// Raw AsMap of window `w`.
    pub fn asmap(&self, window: usize, selection: &BandSelection) -> Result<AsMapTensor> {
        asmap(&self.window_slice(window), &self.bands, selection)
    }
}

/// Min–max scales every band plane to [0, 1]. A constant plane maps to 0.5.
pub fn normalize_asmap(raw: &AsMapTensor) -> Result<AsMapTensor> {
    if raw.normalized {
        return Err(Error::invalid("AsMap is already normalized"));
    }
    let nn = raw.n_channels * raw.n_channels;
    let mut values = Vec::with_capacity(raw.values.len());
    for plane in raw.values.chunks(nn) {
        let (min, max) = plane.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = max - min;
        if range > 0.0 {
            values.extend(plane.iter().map(|&v| (v - min) / range));
        } else {
            values.extend(std::iter::repeat_n(0.5, plane.len()));
        }
    }
    AsMapTensor::from_values(raw.n_channels, raw.band_names.clone(), true, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::BandName;

    fn gamma_only(col: &[f64]) -> AsMapTensor {
        let rows: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
        asmap(&rows, &[BandName::Gamma.band()], &BandSelection::All).unwrap()
    }

    #[test]
    fn hand_computed_map() {
        let m = gamma_only(&[2.0, 5.0, 3.0]);
        assert_eq!(m.values(), &[0.0, -3.0, -1.0, 3.0, 0.0, 2.0, 1.0, -2.0, 0.0]);
        assert!(!m.normalized);
    }

    #[test]
    fn hand_computed_normalization() {
        let n = normalize_asmap(&gamma_only(&[2.0, 5.0, 3.0])).unwrap();
        let expected = [0.5, 0.0, 1.0 / 3.0, 1.0, 0.5, 5.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 0.5];
        for (a, b) in n.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(normalize_asmap(&n).is_err());
    }

    #[test]
    fn degenerate_plane_is_half() {
        let n = normalize_asmap(&gamma_only(&[1.7; 4])).unwrap();
        assert!(n.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn deap_all_band_shape() {
        let rows: Vec<Vec<f64>> = (0..32).map(|c| vec![c as f64; 5]).collect();
        let m = asmap(&rows, &Band::canonical(), &BandSelection::All).unwrap();
        assert_eq!(m.shape(), [5, 32, 32]);
        let g = asmap(&rows, &Band::canonical(), &BandSelection::Single(BandName::Gamma)).unwrap();
        assert_eq!(g.band_names, vec!["gamma".to_string()]);
        assert_eq!(m.select_bands(&[4]).unwrap(), g);
    }

    #[test]
    fn single_channel_rejected() {
        assert!(asmap(&[vec![1.0]], &[BandName::Gamma.band()], &BandSelection::All).is_err());
    }
}
