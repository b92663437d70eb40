//! A complete on-disk project around the tiny ARM fixture: config,
//! decompiled corpus, ground truth and source tree. Three source files give
//! three ground-truth modules.

use std::io;
use std::path::{Path, PathBuf};

use firmod_core::corpus::{write_decompiled_corpus, DecompiledFunction};
use firmod_core::Addr;

pub const MODEL: &str = "mock-coder";
pub const EMBED_MODEL: &str = "mock-embed";
pub const DEVICE: &str = "TinyArm";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// `(name, entry, ground-truth module, register hint)` for every function
/// in the fixture. Functions without a module are left unlabeled and get
/// decompiled text too short to pass the length filter.
pub const FUNCTIONS: &[(&str, u64, Option<&str>, &str)] = &[
    ("uart_putc", 0x0800_0000, Some("uart"), "UART1_DR"),
    ("uart_puts", 0x0800_0022, Some("uart"), "UART1_SR"),
    ("uart_init", 0x0800_0040, Some("uart"), "UART1_BRR"),
    ("uart_flush", 0x0800_0058, Some("uart"), "UART1_CR1"),
    ("nav_distance", 0x0800_00ec, Some("nav"), "GPS_LAT"),
    ("nav_update", 0x0800_010c, Some("nav"), "GPS_LON"),
    ("nav_step", 0x0800_0120, Some("nav"), "WAYPOINT_IDX"),
    ("nav_report", 0x0800_013c, Some("nav"), "POSITION_BUF"),
    ("ctrl_dispatch", 0x0800_0158, Some("ctrl"), "MOTOR_MODE"),
    ("ctrl_pid", 0x0800_0174, Some("ctrl"), "PID_GAIN"),
    ("ctrl_tail", 0x0800_019a, Some("ctrl"), "MOTOR_PWM"),
    ("on_idle", 0x0800_01a0, None, "IDLE"),
    ("on_active", 0x0800_01ac, None, "ACTIVE"),
    ("main", 0x0800_01bc, None, "SYS"),
    ("Reset_Handler", 0x0800_02c4, None, "RESET"),
];

pub const GT_CATEGORIES: &[(&str, &str)] = &[("uart", "data_transfer"), ("nav", "navigation"), ("ctrl", "controller")];

/// Stripped-style pseudocode: 17 non-blank lines for labeled functions,
/// 5 for the rest.
pub fn decompiled_text(entry: u64, hint: &str, long: bool) -> String {
    let mut t = format!("undefined4 FUN_{entry:08x}(int param_1,int param_2)\n\n{{\n  int iVar1;\n  uint uVar2;\n\n");
    if long {
        for i in 0..5 {
            t.push_str(&format!("  iVar1 = *(int *)({hint} + {});\n", 4 * i));
            t.push_str(&format!("  uVar2 = (uint)(iVar1 >> {}) & 0xff;\n", i + 1));
        }
        t.push_str(&format!(
            "  *(uint *)({hint} + 0x20) = uVar2;\n  if (param_1 != 0) {{\n    return param_2;\n  }}\n"
        ));
    }
    t.push_str("  return 0;\n}\n");
    t
}

/// Writes the project under `root` and returns the config path.
pub fn write_fixture_project(root: &Path) -> io::Result<PathBuf> {
    let fixtures = fixture_dir().canonicalize()?;
    let functions: Vec<DecompiledFunction> = FUNCTIONS
        .iter()
        .map(|(_, entry, module, hint)| {
            DecompiledFunction::new(Addr(*entry), decompiled_text(*entry, hint, module.is_some()))
        })
        .collect();
    write_decompiled_corpus(&root.join("decompiled"), &functions).map_err(io::Error::other)?;

    let gt_dir = root.join("gt");
    std::fs::create_dir_all(&gt_dir)?;
    let modules: Vec<String> = FUNCTIONS
        .iter()
        .filter_map(|(_, entry, module, _)| module.map(|m| format!("  \"{}\": \"{m}\"", Addr(*entry))))
        .collect();
    std::fs::write(gt_dir.join("modules.json"), format!("{{\n{}\n}}\n", modules.join(",\n")))?;
    let cats: Vec<String> = GT_CATEGORIES.iter().map(|(m, c)| format!("  \"{m}\": [\"{c}\"]")).collect();
    std::fs::write(gt_dir.join("categories.json"), format!("{{\n{}\n}}\n", cats.join(",\n")))?;

    let config = root.join("firmod.toml");
    std::fs::write(
        &config,
        format!(
            r#"device = "{DEVICE}"
binary = "{bin}"
decompiled_manifest = "decompiled/manifest.json"
source_root = "{src}"

[ground_truth]
modules = "gt/modules.json"
categories = "gt/categories.json"

[llm]
base_url = "http://127.0.0.1:9/v1"
models = ["{MODEL}"]
embed_model = "{EMBED_MODEL}"
retries = 1
backoff_ms = 1
concurrency = 4
"#,
            bin = fixtures.join("tiny_arm.elf").display(),
            src = fixtures.join("src").display(),
        ),
    )?;
    Ok(config)
}
