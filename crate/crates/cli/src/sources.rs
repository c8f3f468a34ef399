//! Resolution of `--x`, `--y` and `--pairs` into generators or loaded files.

use kcum::data::{
    load_csv, standardize_minmax, CsvSchema, Generator, PairedSource, PairedSubsample, SampleSource, Subsample,
};
use kcum::Dataset;

use crate::{CliError, CliResult};

/// A one-group sample source named on the command line.
#[derive(Debug, Clone)]
pub enum Sample {
    Generator(Generator),
    File { label: String, data: Subsample },
}

impl Sample {
    pub fn source(&self) -> &dyn SampleSource {
        match self {
            Sample::Generator(g) => g,
            Sample::File { data, .. } => data,
        }
    }

    /// The whole loaded file, if this is file input.
    pub fn dataset(&self) -> Option<&Dataset> {
        match self {
            Sample::Generator(_) => None,
            Sample::File { data, .. } => Some(&data.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Sample::Generator(g) => g.to_string(),
            Sample::File { label, data } => format!("{label} ({} rows, {} columns)", data.0.len(), data.0.dim()),
        }
    }
}

/// A paired sample source named on the command line.
#[derive(Debug, Clone)]
pub enum Paired {
    Generator(Generator),
    File { label: String, data: PairedSubsample },
}

impl Paired {
    pub fn source(&self) -> &dyn PairedSource {
        match self {
            Paired::Generator(g) => g,
            Paired::File { data, .. } => data,
        }
    }

    pub fn datasets(&self) -> Option<(&Dataset, &Dataset)> {
        match self {
            Paired::Generator(_) => None,
            Paired::File { data, .. } => Some((&data.x, &data.y)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Paired::Generator(g) => g.to_string(),
            Paired::File { label, data } => format!(
                "{label} ({} rows, {} + {} columns)",
                data.x.len(),
                data.x.dim(),
                data.y.dim()
            ),
        }
    }
}

/// How CSV input is read.
#[derive(Debug, Clone, Default)]
pub struct FileOptions {
    pub header: bool,
    pub label_col: Option<usize>,
    pub standardize: bool,
}

fn is_generator(spec: &str) -> bool {
    spec.starts_with("gen:")
}

fn generator(flag: &str, spec: &str) -> CliResult<Generator> {
    spec.parse().map_err(|e| CliError::from_kcum(flag, e))
}

fn load(flag: &str, path: &str, columns: Option<Vec<usize>>, opts: &FileOptions) -> CliResult<kcum::data::LoadedCsv> {
    let schema = CsvSchema {
        has_header: opts.header,
        columns,
        label_column: opts.label_col,
    };
    let mut loaded = load_csv(path, &schema).map_err(|e| CliError::from_kcum(flag, e))?;
    // Scaling happens on the whole file so that groups keep their offsets.
    if opts.standardize {
        loaded.data = standardize_minmax(&loaded.data);
    }
    Ok(loaded)
}

/// Resolves a two-sample operand. `group` selects rows by label and is
/// required exactly when a label column is configured.
pub fn sample(
    flag: &str,
    spec: &str,
    columns: Option<&[usize]>,
    group: Option<&str>,
    opts: &FileOptions,
) -> CliResult<Sample> {
    if is_generator(spec) {
        let g = generator(flag, spec)?;
        if g.is_paired() {
            return Err(CliError::Usage(format!("{flag}: {spec} is a paired generator")));
        }
        return Ok(Sample::Generator(g));
    }
    let loaded = load(flag, spec, columns.map(<[usize]>::to_vec), opts)?;
    let (data, label) = match (opts.label_col, group) {
        (Some(_), Some(g)) => {
            let data = loaded
                .group(g)
                .ok_or_else(|| CliError::Data(format!("{flag}: no rows labelled {g:?} in {spec}")))?;
            (data, format!("{spec}[{g}]"))
        }
        (Some(_), None) => {
            return Err(CliError::Usage(format!("{flag}: --label-col needs a group for this sample")));
        }
        (None, Some(_)) => {
            return Err(CliError::Usage(format!("{flag}: a group was given without --label-col")));
        }
        (None, None) => (loaded.data, spec.to_owned()),
    };
    if data.is_empty() {
        return Err(CliError::Data(format!("{flag}: {label} holds no rows")));
    }
    Ok(Sample::File {
        label,
        data: Subsample(data),
    })
}

/// Resolves `--pairs`. File input needs both column selections.
pub fn paired(spec: &str, x_cols: Option<&[usize]>, y_cols: Option<&[usize]>, opts: &FileOptions) -> CliResult<Paired> {
    if is_generator(spec) {
        let g = generator("--pairs", spec)?;
        if !g.is_paired() {
            return Err(CliError::Usage(format!("--pairs: {spec} is not a paired generator")));
        }
        return Ok(Paired::Generator(g));
    }
    if opts.label_col.is_some() {
        return Err(CliError::Usage("--label-col does not apply to --pairs".into()));
    }
    let (Some(xc), Some(yc)) = (x_cols, y_cols) else {
        return Err(CliError::Usage("--pairs with a file needs --x-cols and --y-cols".into()));
    };
    let x = load("--x-cols", spec, Some(xc.to_vec()), opts)?.data;
    let y = load("--y-cols", spec, Some(yc.to_vec()), opts)?.data;
    let data = PairedSubsample::new(x, y).map_err(|e| CliError::from_kcum("--pairs", e))?;
    if data.x.is_empty() {
        return Err(CliError::Data(format!("--pairs: {spec} holds no rows")));
    }
    Ok(Paired::File {
        label: spec.to_owned(),
        data,
    })
}
