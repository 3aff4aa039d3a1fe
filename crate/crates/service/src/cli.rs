//! `cnn-lens` command line.
//!
//! Exit codes: 0 success, 1 other failure (I/O, unreadable trace, tolerance
//! exceeded), 2 bad flags, 3 image decode error, 4 model error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cnn_lens_core::document::{deserialize_trace, serialize_trace, trace_diff};
use cnn_lens_core::layers::{shape_report, ConvHyper};
use cnn_lens_core::{Engine, Error};

use crate::server::{self, ServeConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DECODE: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cnn-lens", version, about = "Traced Tiny VGG forward passes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify an image and write its full trace document.
    Classify(ClassifyArgs),
    /// Output size of a convolution for given hyperparameters.
    Shape(ShapeArgs),
    /// Compare two trace documents layer by layer.
    TraceDiff(TraceDiffArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["image", "preset"])))]
pub struct ClassifyArgs {
    /// Weights file.
    #[arg(long, env = "CNN_LENS_MODEL")]
    pub model: PathBuf,
    /// PNG or JPEG to classify.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Bundled preset id instead of an image file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Where to write the trace document.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    /// Input side length.
    #[arg(long = "in")]
    pub input: usize,
    #[arg(long)]
    pub kernel: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub pad: usize,
}

#[derive(Debug, Args)]
pub struct TraceDiffArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Exit 1 if any layer deviates by more than this.
    #[arg(long)]
    pub tol: Option<f32>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Weights file; the seeded model is used when absent.
    #[arg(long, env = "CNN_LENS_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory holding the built UI bundle, served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.exit_code() {
                0 => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match cli.command {
        Command::Classify(args) => classify(&args, out, err),
        Command::Shape(args) => shape(&args, out, err),
        Command::TraceDiff(args) => diff(&args, out, err),
        Command::Serve(args) => serve(&args, err),
    }
}

fn load_engine(path: Option<&Path>, err: &mut dyn Write) -> Result<Engine, i32> {
    server::load_engine(path).map_err(|e| {
        let _ = writeln!(err, "model error: {e}");
        EXIT_MODEL
    })
}

fn classify(args: &ClassifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let engine = match load_engine(Some(&args.model), err) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let result = match (&args.image, &args.preset) {
        (Some(path), _) => match std::fs::read(path) {
            Ok(bytes) => engine.classify_image(&bytes),
            Err(e) => Err(Error::Decode(format!("reading {}: {e}", path.display()))),
        },
        (None, Some(id)) => engine.classify_preset(id),
        (None, None) => unreachable!("clap requires an input source"),
    };
    let trace = match result {
        Ok(trace) => trace,
        Err(e @ Error::Decode(_)) => {
            let _ = writeln!(err, "{e}");
            return EXIT_DECODE;
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAILURE;
        }
    };
    if let Some(path) = &args.out {
        if let Err(e) = std::fs::write(path, serialize_trace(&trace)) {
            let _ = writeln!(err, "writing {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    }
    let pred = trace.prediction.expect("full forward pass has a prediction");
    let _ = writeln!(out, "{}\t{:.4}", pred.label, pred.probability);
    EXIT_OK
}

fn shape(args: &ShapeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if args.input == 0 {
        let _ = writeln!(err, "--in must be positive");
        return EXIT_USAGE;
    }
    let h = match ConvHyper::new(args.kernel, args.stride, args.pad, 1, 1) {
        Ok(h) => h,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    let r = shape_report(args.input, args.input, &h);
    let _ = writeln!(out, "out: {}x{}", r.out_rows, r.out_cols);
    let _ = writeln!(out, "fits_exactly: {}", r.fits_exactly);
    let _ = writeln!(out, "valid: {}", r.valid);
    EXIT_OK
}

fn diff(args: &TraceDiffArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let read = |path: &Path| {
        std::fs::read(path)
            .map_err(|e| format!("reading {}: {e}", path.display()))
            .and_then(|b| deserialize_trace(&b).map_err(|e| format!("{}: {e}", path.display())))
    };
    let (a, b) = match (read(&args.a), read(&args.b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAILURE;
        }
    };
    let mut within = true;
    for d in trace_diff(&a, &b) {
        match d.max_abs {
            Some(v) => {
                let _ = writeln!(out, "{}\t{v:e}", d.name);
                within &= args.tol.is_none_or(|tol| v <= tol);
            }
            None => {
                let _ = writeln!(out, "{}\tmismatch", d.name);
                within = false;
            }
        }
    }
    if a.prediction.as_ref().map(|p| p.class_index) != b.prediction.as_ref().map(|p| p.class_index) {
        let _ = writeln!(out, "prediction\tdiffers");
        within = false;
    }
    if args.tol.is_some() && !within {
        return EXIT_FAILURE;
    }
    EXIT_OK
}

fn serve(args: &ServeArgs, err: &mut dyn Write) -> i32 {
    let engine = match load_engine(args.model.as_deref(), err) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let config = ServeConfig {
        addr: SocketAddr::new(args.host, args.port),
        model_path: args.model.clone(),
        ui_dir: args.ui_dir.clone(),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "starting runtime: {e}");
            return EXIT_FAILURE;
        }
    };
    match runtime.block_on(server::serve(engine, &config)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e:#}");
            EXIT_FAILURE
        }
    }
}
