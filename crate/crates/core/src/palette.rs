//! Shared shape and color vocabulary.
//!
//! Eight maximally separated hues plus a reserved mid-gray background. The
//! renderer paints with these exact values and the detector quantizes back to
//! them, so color identity survives the round trip unambiguously.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Renderable shape kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle];

    pub fn noun(&self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
        }
    }

    pub fn plural(&self) -> &'static str {
        match self {
            ShapeKind::Circle => "circles",
            ShapeKind::Square => "squares",
            ShapeKind::Triangle => "triangles",
        }
    }

    pub fn from_noun(word: &str) -> Option<ShapeKind> {
        match word {
            "circle" | "circles" => Some(ShapeKind::Circle),
            "square" | "squares" => Some(ShapeKind::Square),
            "triangle" | "triangles" => Some(ShapeKind::Triangle),
            _ => None,
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.noun())
    }
}

/// The eight-color palette.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorName {
    Red,
    Orange,
    Yellow,
    Green,
    Cyan,
    Blue,
    Purple,
    Magenta,
}

impl ColorName {
    pub const ALL: [ColorName; 8] = [
        ColorName::Red,
        ColorName::Orange,
        ColorName::Yellow,
        ColorName::Green,
        ColorName::Cyan,
        ColorName::Blue,
        ColorName::Purple,
        ColorName::Magenta,
    ];

    pub fn word(&self) -> &'static str {
        match self {
            ColorName::Red => "red",
            ColorName::Orange => "orange",
            ColorName::Yellow => "yellow",
            ColorName::Green => "green",
            ColorName::Cyan => "cyan",
            ColorName::Blue => "blue",
            ColorName::Purple => "purple",
            ColorName::Magenta => "magenta",
        }
    }

    pub fn from_word(word: &str) -> Option<ColorName> {
        ColorName::ALL.iter().copied().find(|c| c.word() == word)
    }

    /// RGB value in [0, 1].
    pub fn rgb(&self) -> [f32; 3] {
        match self {
            ColorName::Red => [0.90, 0.10, 0.10],
            ColorName::Orange => [0.95, 0.55, 0.05],
            ColorName::Yellow => [0.95, 0.90, 0.10],
            ColorName::Green => [0.10, 0.75, 0.15],
            ColorName::Cyan => [0.10, 0.80, 0.85],
            ColorName::Blue => [0.10, 0.20, 0.90],
            ColorName::Purple => [0.55, 0.15, 0.85],
            ColorName::Magenta => [0.90, 0.15, 0.65],
        }
    }
}

impl fmt::Display for ColorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// Background gray used by the renderer, the compositor sentinel, and the
/// plain-background segmentation threshold.
pub const BACKGROUND_GRAY: [f32; 3] = [0.5, 0.5, 0.5];

/// Euclidean RGB distance scaled to [0, 1].
pub fn color_distance(a: [f32; 3], b: [f32; 3]) -> f32 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
    (d2 / 3.0).sqrt()
}

/// Nearest palette color, or None if the pixel is closer to background gray.
pub fn quantize(rgb: [f32; 3]) -> Option<ColorName> {
    let mut best = None;
    let mut best_d = color_distance(rgb, BACKGROUND_GRAY);
    for c in ColorName::ALL {
        let d = color_distance(rgb, c.rgb());
        if d < best_d {
            best_d = d;
            best = Some(c);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_colors_quantize_to_themselves() {
        for c in ColorName::ALL {
            assert_eq!(quantize(c.rgb()), Some(c));
        }
    }

    #[test]
    fn gray_quantizes_to_background() {
        assert_eq!(quantize(BACKGROUND_GRAY), None);
        assert_eq!(quantize([0.52, 0.49, 0.51]), None);
    }

    #[test]
    fn palette_is_well_separated() {
        // Every pair of palette colors (and gray) at least 0.15 apart, so the
        // thresholding segmenter and detector can never confuse two entries.
        let mut entries: Vec<[f32; 3]> = ColorName::ALL.iter().map(|c| c.rgb()).collect();
        entries.push(BACKGROUND_GRAY);
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                assert!(
                    color_distance(entries[i], entries[j]) > 0.15,
                    "colors {i} and {j} too close"
                );
            }
        }
    }
}
