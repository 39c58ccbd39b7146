//! Plain-text artifacts: CSV tables and images, portable graymaps.
//!
//! Every artifact opens with a few `# key: value` comment lines carrying
//! provenance (tool version, configuration digest, seed), so a file can be
//! traced back to the run that produced it.

use std::io::Write;

use crate::diffraction::DiffractionImage;
use crate::error::{Error, Result};

/// Provenance lines written at the top of every artifact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArtifactHeader {
    pub entries: Vec<(String, String)>,
}

impl ArtifactHeader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}: {}", v.replace('\n', " ")))
    }

    fn write_comments<W: Write>(&self, w: &mut W) -> Result<()> {
        for l in self.lines() {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

/// `kx,ky,value` rows, one per pixel, row-major.
pub fn write_image_csv<W: Write>(
    mut w: W,
    image: &DiffractionImage,
    header: &ArtifactHeader,
) -> Result<()> {
    header.write_comments(&mut w)?;
    writeln!(w, "# mode: {}", image.mode.as_str())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kx", "ky", "value"])?;
    let values = image.values();
    for (p, v) in image.grid.points().zip(values) {
        out.write_record([fmt(p[0]), fmt(p[1]), fmt(v)])?;
    }
    out.flush()?;
    Ok(())
}

/// A table with named columns of numbers.
pub fn write_table_csv<W: Write>(
    mut w: W,
    header: &ArtifactHeader,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
        return Err(Error::LengthMismatch {
            what: "table row",
            expected: columns.len(),
            found: bad.len(),
        });
    }
    header.write_comments(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(columns)?;
    for r in rows {
        out.write_record(r.iter().map(|&v| fmt(v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest text that parses back to the same `f64`.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrayScale {
    #[default]
    Linear,
    /// `ln(1 + v/v_min⁺)`, where `v_min⁺` is the smallest positive pixel.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65_535,
        }
    }
}

/// Binary PGM (P5). The provenance lines go into the PGM comment block.
/// The k-space y axis points up, so the last grid row is written first.
pub fn write_pgm<W: Write>(
    mut w: W,
    image: &DiffractionImage,
    depth: BitDepth,
    scale: GrayScale,
    header: &ArtifactHeader,
) -> Result<()> {
    let g = image.grid;
    let values = image.values();
    let mapped: Vec<f64> = match scale {
        GrayScale::Linear => values,
        GrayScale::Log => {
            let floor = values
                .iter()
                .cloned()
                .filter(|v| *v > 0.0)
                .fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 1.0 };
            values
                .iter()
                .map(|v| (v.max(0.0) / floor).ln_1p())
                .collect()
        }
    };
    let lo = mapped.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let maxv = depth.max_value();

    writeln!(w, "P5")?;
    for l in header.lines() {
        writeln!(w, "# {l}")?;
    }
    writeln!(w, "# range: {lo:?} {hi:?}")?;
    writeln!(w, "{} {}", g.nx, g.ny)?;
    writeln!(w, "{maxv}")?;
    let mut buf = Vec::with_capacity(mapped.len() * 2);
    for iy in (0..g.ny).rev() {
        for ix in 0..g.nx {
            let v = mapped[iy * g.nx + ix];
            let level = (((v - lo) / span) * maxv as f64)
                .round()
                .clamp(0.0, maxv as f64) as u32;
            match depth {
                BitDepth::Eight => buf.push(level as u8),
                BitDepth::Sixteen => buf.extend_from_slice(&(level as u16).to_be_bytes()),
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::{ImageData, ImageMode, KGrid};

    fn image() -> DiffractionImage {
        DiffractionImage {
            grid: KGrid::new([0.0, 0.0], 1.0, 3, 2).unwrap(),
            data: ImageData::Intensity(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
            mode: ImageMode::Analytic,
            n_atoms: 2,
            k0: 10.0,
            theta_b: 0.1,
            clipped_pixels: 0,
        }
    }

    #[test]
    fn csv_image_round_trips() {
        let h = ArtifactHeader::new().with("digest", "abc").with("seed", 7);
        let mut out = Vec::new();
        write_image_csv(&mut out, &image(), &h).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# digest: abc\n# seed: 7\n"));
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let vals: Vec<f64> = rd
            .records()
            .map(|r| r.unwrap()[2].parse().unwrap())
            .collect();
        assert_eq!(vals, image().values());
    }

    #[test]
    fn table_rejects_ragged_rows() {
        let h = ArtifactHeader::new();
        let mut out = Vec::new();
        assert!(write_table_csv(&mut out, &h, &["a", "b"], &[vec![1.0]]).is_err());
        write_table_csv(&mut out, &h, &["a", "b"], &[vec![0.1, 2.0]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n0.1,2.0\n");
    }

    #[test]
    fn pgm_layout() {
        let h = ArtifactHeader::new().with("version", "1");
        let mut out = Vec::new();
        write_pgm(&mut out, &image(), BitDepth::Eight, GrayScale::Linear, &h).unwrap();
        let body_at = out.len() - 6;
        let head = String::from_utf8(out[..body_at].to_vec()).unwrap();
        assert!(head.starts_with("P5\n# version: 1\n"));
        assert!(head.ends_with("3 2\n255\n"));
        // top row of the file is the highest ky
        assert_eq!(&out[body_at..], &[153, 204, 255, 0, 51, 102]);

        let mut out16 = Vec::new();
        write_pgm(&mut out16, &image(), BitDepth::Sixteen, GrayScale::Log, &h).unwrap();
        let body = &out16[out16.len() - 12..];
        assert_eq!(&body[4..6], &[0xff, 0xff]);
        assert_eq!(&body[6..8], &[0, 0]);
    }
}
