//! Artifact files and the plain-text run report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use stokesdiff::diffraction::DiffractionImage;
use stokesdiff::export::{
    write_image_csv, write_pgm, write_table_csv, ArtifactHeader, BitDepth, GrayScale,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Pgm,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    fn pgm(self) -> bool {
        matches!(self, Format::Pgm | Format::Both)
    }
}

/// Collects artifacts and report lines for one subcommand run.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    format: Format,
    header: ArtifactHeader,
    report: Vec<String>,
    written: Vec<String>,
}

impl Output {
    pub fn new(
        dir: &Path,
        command: &'static str,
        format: Format,
        header: ArtifactHeader,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            format,
            header,
            report: Vec::new(),
            written: Vec::new(),
        })
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.report.push(text.into());
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let file = format!("{}_{name}", self.command);
        let f = File::create(self.dir.join(&file))?;
        self.written.push(file);
        Ok(BufWriter::new(f))
    }

    /// Writes an image as CSV and/or PGM, as selected by `--format`.
    pub fn image(&mut self, name: &str, image: &DiffractionImage) -> Result<(), CliError> {
        if self.format.csv() {
            let mut w = self.create(&format!("{name}.csv"))?;
            write_image_csv(&mut w, image, &self.header)?;
            w.flush()?;
        }
        if self.format.pgm() {
            let header = self.header.clone();
            let mut w = self.create(&format!("{name}.pgm"))?;
            write_pgm(&mut w, image, BitDepth::Sixteen, GrayScale::Linear, &header)?;
            w.flush()?;
        }
        Ok(())
    }

    /// Tables are always CSV.
    pub fn table(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<f64>],
    ) -> Result<(), CliError> {
        let header = self.header.clone();
        let mut w = self.create(&format!("{name}.csv"))?;
        write_table_csv(&mut w, &header, columns, rows)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `<command>_report.txt` (header, report lines, resolved config)
    /// and returns the report text for the terminal.
    pub fn finish(mut self, canonical_config: &str) -> Result<String, CliError> {
        let mut text = String::new();
        for (k, v) in &self.header.entries {
            text.push_str(&format!("# {k}: {v}\n"));
        }
        for l in &self.report {
            text.push_str(l);
            text.push('\n');
        }
        if !self.written.is_empty() {
            text.push_str("artifacts:\n");
            for f in &self.written {
                text.push_str(&format!("  {f}\n"));
            }
        }
        let mut body = text.clone();
        body.push_str("\n[resolved configuration]\n");
        body.push_str(canonical_config);
        let mut w = self.create("report.txt")?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(text)
    }
}
