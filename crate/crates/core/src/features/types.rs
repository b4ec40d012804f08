use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::ElementSaliencyVector;

/// Half-open pixel box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::Invalid(format!("empty bounding box [{x0}, {y0}, {x1}, {y1}]")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1) as f64, 0.5 * (self.y0 + self.y1) as f64)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x1 as usize <= width && self.y1 as usize <= height
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0 as usize..self.x1 as usize).contains(&x) && (self.y0 as usize..self.y1 as usize).contains(&y)
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width as u32,
            y1: height as u32,
        }
    }
}

impl TryFrom<[u32; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [u32; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub id: u32,
    pub bbox: BoundingBox,
}

/// Interleaved RGB raster with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image with {} values",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_box(&mut self, b: &BoundingBox, rgb: [f32; 3]) {
        for y in b.y0 as usize..b.y1 as usize {
            for x in b.x0 as usize..b.x1 as usize {
                self.set_pixel(x, y, rgb);
            }
        }
    }

    /// Copy of the pixels inside `b`.
    pub fn crop(&self, b: &BoundingBox) -> RgbImage {
        let (w, h) = (b.width() as usize, b.height() as usize);
        let mut data = Vec::with_capacity(w * h * 3);
        for y in b.y0 as usize..b.y1 as usize {
            let row = (y * self.width + b.x0 as usize) * 3;
            data.extend_from_slice(&self.data[row..row + w * 3]);
        }
        RgbImage {
            width: w,
            height: h,
            data,
        }
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer length matches dimensions")
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_rgb8().write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }
}

/// A screenshot with its element boxes and optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct UiScreen {
    pub id: String,
    pub image: RgbImage,
    pub elements: Vec<UiElement>,
    pub ground_truth: Option<ElementSaliencyVector>,
}

impl UiScreen {
    pub fn new(id: impl Into<String>, image: RgbImage, elements: Vec<UiElement>) -> Result<Self> {
        let screen = Self {
            id: id.into(),
            image,
            elements,
            ground_truth: None,
        };
        screen.validate()?;
        Ok(screen)
    }

    pub fn with_ground_truth(mut self, gt: ElementSaliencyVector) -> Result<Self> {
        self.ground_truth = Some(gt);
        self.validate()?;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::Manifest {
            screen: self.id.clone(),
            reason,
        };
        if self.elements.is_empty() {
            return Err(bad("screen has no elements".into()));
        }
        let mut ids: Vec<u32> = self.elements.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("duplicate element ids".into()));
        }
        for e in &self.elements {
            if !e.bbox.fits(self.width(), self.height()) {
                return Err(bad(format!(
                    "element {} bbox {:?} outside {}x{} image",
                    e.id,
                    <[u32; 4]>::from(e.bbox),
                    self.width(),
                    self.height()
                )));
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != self.elements.len() {
                return Err(bad(format!(
                    "ground truth has {} entries for {} elements",
                    gt.len(),
                    self.elements.len()
                )));
            }
        }
        Ok(())
    }
}
