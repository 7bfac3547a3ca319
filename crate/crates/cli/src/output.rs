use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Output directory with fixed file names. Each file is written by one writer
/// in one go.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write<F>(&self, name: &str, body: F) -> io::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

/// `user,label,<column>` rows.
pub fn write_user_column<W: Write>(w: &mut W, column: &str, labels: &[String], values: &[f64]) -> io::Result<()> {
    writeln!(w, "user,label,{column}")?;
    for (u, v) in values.iter().enumerate() {
        let label = labels.get(u).map_or("supernode", String::as_str);
        writeln!(w, "{u},{},{v}", csv_field(label))?;
    }
    Ok(())
}

/// Quotes a CSV field when it contains a separator or a quote.
pub fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
