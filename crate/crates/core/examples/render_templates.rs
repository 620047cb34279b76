//! Renders the canonical (jitter-free) template of every gesture class,
//! prints an ASCII preview, and optionally writes them as PGM files:
//!
//!   cargo run -p gcnl-core --example render_templates [-- <out-dir>]
//!
//! The committed golden files under tests/golden/ were produced by this tool
//! and eyeballed via the ASCII output.

use gcnl_core::data::{denormalize, encode_image, render_template, ShapeKind};

fn main() {
    let out_dir = std::env::args().nth(1);
    let kinds = [
        ShapeKind::BarAtAngle(45),
        ShapeKind::Circle,
        ShapeKind::Cross,
        ShapeKind::Vee,
        ShapeKind::DotGrid,
    ];
    let size = 32;
    let ramp: Vec<char> = " .:-=+*#%@".chars().collect();
    for kind in kinds {
        let t = render_template(kind, size);
        println!("\n{} ({size}x{size}):", kind.name());
        for row in t.data().chunks_exact(size) {
            let line: String = row
                .iter()
                .map(|&v| ramp[((v * (ramp.len() - 1) as f64).round() as usize).min(ramp.len() - 1)])
                .collect();
            println!("  {line}");
        }
        if let Some(dir) = &out_dir {
            let img = denormalize(&t).unwrap();
            let path = std::path::Path::new(dir).join(format!("{}.pgm", kind.name()));
            std::fs::create_dir_all(dir).unwrap();
            std::fs::write(&path, encode_image(&img)).unwrap();
            println!("  wrote {}", path.display());
        }
    }
}
