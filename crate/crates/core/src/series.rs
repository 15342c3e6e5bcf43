//! Image series and case records.

use crate::landmarks::LandmarkGrid;
use crate::synth::AnalyticDeformation;
use crate::{Error, Result};

/// Side length every preprocessed frame must have.
pub const IMAGE_SIZE: usize = 128;

/// A square grayscale image stored row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(size: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {size}x{size} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self { size, data })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.size + col]
    }
}

/// One slice's cine stack. Frame 0 is end-diastole.
#[derive(Debug, Clone, PartialEq)]
pub struct TagFrameSeries {
    frames: Vec<Image>,
    pub pixel_spacing_mm: f64,
    pub frame_interval_s: f64,
    pub case_id: String,
    pub slice_index: u8,
}

impl TagFrameSeries {
    pub fn new(
        frames: Vec<Image>,
        pixel_spacing_mm: f64,
        frame_interval_s: f64,
        case_id: impl Into<String>,
        slice_index: u8,
    ) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptyInput);
        };
        let size = first.size();
        if frames.iter().any(|f| f.size() != size) {
            return Err(Error::ShapeMismatch(
                "frames of a series must share one size".to_string(),
            ));
        }
        if !(pixel_spacing_mm > 0.0 && frame_interval_s > 0.0) {
            return Err(Error::InvalidArgument(
                "pixel spacing and frame interval must be positive".to_string(),
            ));
        }
        if slice_index > 2 {
            return Err(Error::InvalidArgument(format!(
                "slice index {slice_index} not in 0..=2"
            )));
        }
        Ok(Self {
            frames,
            pixel_spacing_mm,
            frame_interval_s,
            case_id: case_id.into(),
            slice_index,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn image_size(&self) -> usize {
        self.frames[0].size()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &Image {
        &self.frames[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub series: TagFrameSeries,
    pub landmarks: LandmarkGrid,
    pub ground_truth_deformation: Option<AnalyticDeformation>,
}

impl CaseRecord {
    pub fn new(
        series: TagFrameSeries,
        landmarks: LandmarkGrid,
        ground_truth_deformation: Option<AnalyticDeformation>,
    ) -> Result<Self> {
        if landmarks.frame_count() != series.frame_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} landmark frames for {} image frames",
                landmarks.frame_count(),
                series.frame_count()
            )));
        }
        let max = (series.image_size() - 1) as f64;
        for (k, frame) in landmarks.frames().iter().enumerate() {
            if let Some(p) = frame
                .iter()
                .find(|p| !(0.0..=max).contains(&p[0]) || !(0.0..=max).contains(&p[1]))
            {
                return Err(Error::InvalidArgument(format!(
                    "landmark ({:.3}, {:.3}) in frame {k} lies outside the image",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self {
            series,
            landmarks,
            ground_truth_deformation,
        })
    }

    pub fn id(&self) -> &str {
        &self.series.case_id
    }
}
