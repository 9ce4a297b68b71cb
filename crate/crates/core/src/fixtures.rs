//! Synthetic text images with known glyph masks, for tests, benches and demos.

use crate::tensor::{Image, Mask};

// 5×7 bitmaps, one row per string, '#' = ink.
const FONT: &[(char, [&str; 7])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
];

fn glyph(c: char) -> Option<&'static [&'static str; 7]> {
    FONT.iter().find(|(g, _)| *g == c).map(|(_, rows)| rows)
}

/// One word stamped into an image.
#[derive(Debug, Clone, PartialEq)]
pub struct TextStamp {
    pub text: &'static str,
    pub top: usize,
    pub left: usize,
    /// Pixels per font cell.
    pub scale: usize,
    pub ink: [f64; 3],
}

/// A rendered image together with the exact mask of its ink.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphFixture {
    pub name: String,
    pub image: Image,
    pub glyphs: Mask,
}

/// Render `stamps` over a smooth two-colour gradient background.
pub fn render(name: &str, height: usize, width: usize, paper: [[f64; 3]; 2], stamps: &[TextStamp]) -> GlyphFixture {
    let mut ink = vec![None; height * width];
    for s in stamps {
        for (i, c) in s.text.chars().enumerate() {
            let Some(rows) = glyph(c) else { continue };
            let x0 = s.left + i * 6 * s.scale;
            for (gy, row) in rows.iter().enumerate() {
                for (gx, b) in row.bytes().enumerate() {
                    if b != b'#' {
                        continue;
                    }
                    for dy in 0..s.scale {
                        for dx in 0..s.scale {
                            let (y, x) = (s.top + gy * s.scale + dy, x0 + gx * s.scale + dx);
                            if y < height && x < width {
                                ink[y * width + x] = Some(s.ink);
                            }
                        }
                    }
                }
            }
        }
    }
    let image = Image::from_fn(height, width, |y, x| {
        ink[y * width + x].unwrap_or_else(|| {
            let t = (y + x) as f64 / (height + width) as f64;
            std::array::from_fn(|k| paper[0][k] * (1.0 - t) + paper[1][k] * t)
        })
    });
    let glyphs = Mask::from_fn(height, width, |y, x| ink[y * width + x].is_some());
    GlyphFixture {
        name: name.to_string(),
        image,
        glyphs,
    }
}

const DARK: [f64; 3] = [20.0, 20.0, 30.0];
const LIGHT: [f64; 3] = [245.0, 240.0, 230.0];

/// Ten fixtures with varied text size, position, count and polarity.
pub fn glyph_fixtures() -> Vec<GlyphFixture> {
    let cream = [[235.0, 228.0, 210.0], [215.0, 222.0, 235.0]];
    let night = [[30.0, 40.0, 70.0], [50.0, 35.0, 60.0]];
    let stamp = |text, top, left, scale, ink| TextStamp {
        text,
        top,
        left,
        scale,
        ink,
    };
    vec![
        render("hello", 96, 128, cream, &[stamp("HELLO", 30, 10, 3, DARK)]),
        render("stop", 64, 96, cream, &[stamp("STOP", 18, 12, 3, [180.0, 20.0, 25.0])]),
        render("exit_small", 64, 64, cream, &[stamp("EXIT", 24, 8, 2, DARK)]),
        render("tap_large", 128, 128, cream, &[stamp("TAP", 36, 12, 6, DARK)]),
        render("two_words", 128, 128, cream, &[stamp("SALE", 16, 8, 3, DARK), stamp("HOTEL", 84, 30, 3, DARK)]),
        render("light_on_dark", 96, 96, night, &[stamp("LOST", 34, 12, 3, LIGHT)]),
        render("corner", 96, 96, cream, &[stamp("OPEN", 60, 44, 2, DARK)]),
        render("tall", 128, 64, cream, &[stamp("HA", 20, 8, 4, DARK), stamp("LO", 80, 8, 4, DARK)]),
        render("wide", 64, 128, night, &[stamp("TEXT", 20, 16, 3, [250.0, 210.0, 60.0])]),
        render("mixed", 96, 128, cream, &[stamp("PASTE", 12, 6, 2, DARK), stamp("HOLE", 54, 50, 3, [30.0, 90.0, 160.0])]),
    ]
}
