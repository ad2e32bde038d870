//! Forward-model description shared by `degrade` and `restore`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use pguide::io::{read_kernel, read_mask};
use pguide::linops::Kernel;
use pguide::{Image, Operator, Shape};

use crate::settings::Settings;
use crate::{invalid, pnm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Deblur,
    Sr,
    Inpaint,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Deblur => "deblur",
            Task::Sr => "sr",
            Task::Inpaint => "inpaint",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deblur" => Ok(Task::Deblur),
            "sr" => Ok(Task::Sr),
            "inpaint" => Ok(Task::Inpaint),
            _ => Err("expected deblur, sr or inpaint".into()),
        }
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what} file not found: {}",
            path.display()
        )))
    }
}

/// Reads a PGT1 tensor or an 8-bit PGM/PPM, chosen by magic bytes.
pub fn load_image(path: &Path) -> Result<Image> {
    require_file(path, "image")?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let origin = path.display().to_string();
    if bytes.starts_with(pguide::io::TENSOR_MAGIC) {
        Ok(pguide::io::decode_tensor(&bytes, &origin)?)
    } else {
        pnm::decode(&bytes, &origin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub task: Task,
    pub kernel: Option<PathBuf>,
    pub scale: usize,
    pub mask: Option<PathBuf>,
}

impl OperatorSpec {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let spec = Self {
            task: s.require("task")?,
            kernel: s.get("kernel").map(PathBuf::from),
            scale: s.or("scale", 1)?,
            mask: s.get("mask").map(PathBuf::from),
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        match self.task {
            Task::Deblur if self.kernel.is_none() => {
                return Err(invalid("deblur needs a kernel file"))
            }
            Task::Sr if self.scale < 2 => return Err(invalid("sr needs scale >= 2")),
            Task::Inpaint if self.mask.is_none() => {
                return Err(invalid("inpaint needs a mask file"))
            }
            _ => {}
        }
        if let Some(k) = &self.kernel {
            require_file(k, "kernel")?;
        }
        if let Some(m) = &self.mask {
            require_file(m, "mask")?;
        }
        Ok(())
    }

    fn kernel(&self) -> Result<Kernel<f64>> {
        match &self.kernel {
            Some(path) => Ok(read_kernel(path)?),
            None if self.task == Task::Sr => Ok(Kernel::bicubic(self.scale)?),
            None => Ok(Kernel::delta(1)?),
        }
    }

    pub fn build(&self, input: Shape) -> Result<Operator> {
        let op = match self.task {
            Task::Deblur => Operator::convolution(self.kernel()?, input)?,
            Task::Sr => Operator::downsample(self.kernel()?, self.scale, input)?,
            Task::Inpaint => {
                let path = self.mask.as_ref().expect("checked");
                let (h, w, keep) = read_mask(path)?;
                if (h, w) != (input.height, input.width) {
                    return Err(invalid(format!(
                        "mask {} is {h}x{w}, image is {}x{}",
                        path.display(),
                        input.height,
                        input.width
                    )));
                }
                Operator::mask(h, w, keep, input.channels)?
            }
        };
        Ok(op)
    }

    pub fn record(&self, s: &mut Settings) {
        s.insert("task", self.task);
        s.insert("scale", self.scale);
        s.set("kernel", self.kernel.as_ref().map(|p| p.display()));
        s.set("mask", self.mask.as_ref().map(|p| p.display()));
    }
}

/// Sidecar written next to a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub operator: OperatorSpec,
    pub sigma_e: f64,
    pub seed: u64,
    pub input: Shape,
}

impl Record {
    pub const KEYS: &'static [&'static str] = &[
        "task", "kernel", "scale", "mask", "sigma_e", "seed", "channels", "height", "width",
    ];

    pub fn sidecar_path(measurement: &Path) -> PathBuf {
        let mut s = measurement.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        require_file(path, "measurement record")?;
        let s = Settings::load(path, Self::KEYS)?;
        Ok(Self {
            operator: OperatorSpec::from_settings(&s)?,
            sigma_e: s.require("sigma_e")?,
            seed: s.require("seed")?,
            input: Shape::new(
                s.require("channels")?,
                s.require("height")?,
                s.require("width")?,
            )?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = Settings::default();
        self.operator.record(&mut s);
        s.insert("sigma_e", self.sigma_e);
        s.insert("seed", self.seed);
        s.insert("channels", self.input.channels);
        s.insert("height", self.input.height);
        s.insert("width", self.input.width);
        s.write(path, "measurement record")
    }
}
