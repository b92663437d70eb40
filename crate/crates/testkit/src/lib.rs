//! Seeded generators for graphs, match lists, ranking answers and a small
//! C/C++ corpus. Everything is reproducible from the seed.

pub mod project;

use firmod_core::category::Category;
use firmod_core::corpus::GroundTruthModules;
use firmod_core::graph::{FunctionGraph, GraphKind};
use firmod_core::Addr;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Node `i` lives at `0x1000 + 0x10 * i`.
pub fn node(i: usize) -> Addr {
    Addr(0x1000 + 0x10 * i as u64)
}

fn empty_graph(n: usize) -> FunctionGraph {
    FunctionGraph::new(GraphKind::Combined, (0..n).map(node).collect()).expect("unique nodes")
}

/// 1..=`max_nodes` nodes, each pair joined with probability 0.5 and a
/// weight in (0, 1].
pub fn random_small_graph(rng: &mut StdRng, max_nodes: usize) -> FunctionGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut g = empty_graph(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                let w = 1.0 - rng.gen::<f64>();
                g.add_weight(node(i), node(j), w);
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub communities: usize,
    pub size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub w_in: f64,
    pub w_out: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec { communities: 4, size: 10, p_in: 0.8, p_out: 0.05, w_in: 1.0, w_out: 1.0, seed: 42 }
    }
}

/// Planted-partition graph plus its ground truth (`community_<k>`).
pub fn planted_partition(spec: PlantedSpec) -> (FunctionGraph, GroundTruthModules) {
    let mut rng = rng(spec.seed);
    let n = spec.communities * spec.size;
    let mut g = empty_graph(n);
    let community = |i: usize| i / spec.size;
    for i in 0..n {
        for j in i + 1..n {
            let (p, w) = if community(i) == community(j) { (spec.p_in, spec.w_in) } else { (spec.p_out, spec.w_out) };
            if rng.gen_bool(p) {
                g.add_weight(node(i), node(j), w);
            }
        }
    }
    let mapping = (0..n).map(|i| (node(i), format!("community_{}", community(i)))).collect();
    (g, GroundTruthModules { mapping })
}

/// A graph with exactly `edges` distinct undirected edges, about 85% of
/// them inside blocks of roughly 70 nodes, like functions grouped by
/// library directory.
pub fn scale_graph(seed: u64, nodes: usize, edges: usize) -> FunctionGraph {
    let mut rng = rng(seed);
    let mut g = empty_graph(nodes);
    let block = 70;
    while g.edge_count() < edges {
        let u = rng.gen_range(0..nodes);
        let v = if rng.gen_bool(0.85) {
            let base = u / block * block;
            rng.gen_range(base..(base + block).min(nodes))
        } else {
            rng.gen_range(0..nodes)
        };
        if u != v && g.weight(node(u), node(v)) == 0.0 {
            g.add_weight(node(u), node(v), rng.gen_range(1..=3) as f64);
        }
    }
    g
}

/// Raw `(tp, fp, fn)` triples with `tp + fn >= 1`.
pub fn random_match_counts(rng: &mut StdRng) -> Vec<(usize, usize, usize)> {
    let len = rng.gen_range(1..=30);
    (0..len)
        .map(|_| {
            let tp = rng.gen_range(0..50);
            let fp = rng.gen_range(0..50);
            let fn_ = rng.gen_range(if tp == 0 { 1 } else { 0 }..50);
            (tp, fp, fn_)
        })
        .collect()
}

const FILLER: &[&str] = &[
    "the",
    "module",
    "mostly",
    "handles",
    "this",
    "code",
    "likely",
    "is",
    "about",
    "I",
    "think",
    "ranking",
    "1.",
    "2)",
    "-",
    "*",
    "\n",
    ",",
    "answer:",
    "probably",
    "function",
    "updates",
    "state",
    "loop",
    "buffer",
    "uncontrolled",
    "datatransfer",
    "navigator",
    "safe",
    "0",
    "ØØ",
];

const SPELLINGS: &[(&str, Category)] = &[
    ("Data Transfer", Category::DataTransfer),
    ("data_transfer", Category::DataTransfer),
    ("DATA TRANSFER", Category::DataTransfer),
    ("Navigation", Category::Navigation),
    ("navigation", Category::Navigation),
    ("Controller", Category::Controller),
    ("control", Category::Controller),
    ("Safety Check", Category::SafetyCheck),
    ("safety", Category::SafetyCheck),
    ("Other", Category::Other),
    ("others", Category::Other),
];

/// Free text embedding 0..=5 category names (possibly repeated) in random
/// order among filler words. Returns the text and the distinct categories
/// in order of first mention.
pub fn random_ranking_text(rng: &mut StdRng) -> (String, Vec<Category>) {
    let mentions = rng.gen_range(0..=5);
    let mut words: Vec<String> =
        (0..rng.gen_range(0..20)).map(|_| FILLER.choose(rng).expect("filler").to_string()).collect();
    for _ in 0..mentions {
        let (s, _) = SPELLINGS.choose(rng).expect("spelling");
        let at = rng.gen_range(0..=words.len());
        words.insert(at, s.to_string());
    }
    let text = words.join(" ");
    let mut order = Vec::new();
    let lower = text.to_lowercase();
    let mut hits: Vec<(usize, Category)> = Vec::new();
    for (s, c) in SPELLINGS {
        let s = s.to_lowercase();
        let mut from = 0;
        while let Some(off) = lower[from..].find(&s) {
            let at = from + off;
            let boundary = at == 0 || !lower.as_bytes()[at - 1].is_ascii_alphanumeric();
            if boundary {
                hits.push((at, *c));
            }
            from = at + 1;
        }
    }
    hits.sort_by_key(|h| h.0);
    for (_, c) in hits {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    (text, order)
}

pub fn random_vector(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

/// One source file of the normalizer corpus.
#[derive(Debug, Clone)]
pub struct CorpusFile {
    pub path: String,
    pub text: String,
    pub functions: Vec<String>,
}

/// Function templates with `NAME` as the placeholder for the function
/// name. Each hides braces, quotes or comment markers where a naive
/// scanner would trip.
const C_TEMPLATES: &[&str] = &[
    r#"int NAME(int a, int b)
{
    /* add { two } numbers */
    return a + b; // } not the end
}
"#,
    r#"static void NAME(const char *msg)
{
    const char *open = "{";
    const char *close = "}";
    char brace = '}';
    log_write(open, msg, close, brace);
}
"#,
    r#"uint16_t NAME(const uint8_t *buf, size_t len)
{
    uint16_t crc = 0xFFFFu;
    for (size_t i = 0; i < len; ++i) {
        crc ^= (uint16_t)buf[i] << 8;
        for (int bit = 0; bit < 8; bit++) {
            crc = (crc & 0x8000u) ? (uint16_t)((crc << 1) ^ 0x1021u) : (uint16_t)(crc << 1);
        }
    }
    return crc; /* "}" */
}
"#,
    r#"bool NAME(float lat, float lng, float *out_dist)
{
#if HAL_WITH_GPS
    if (!gps_ok()) { return false; }
#endif
    const float k = 1.5e-3f;
    *out_dist = sqrtf(lat * lat + lng * lng) * k;
    printf("dist=%f {m}\n", *out_dist);
    return true;
}
"#,
    r#"void NAME(struct pid_state *pid, float error, float dt)
{
    pid->integral += error * dt;
    if (pid->integral > pid->imax) {
        pid->integral = pid->imax;
    } else if (pid->integral < -pid->imax) {
        pid->integral = -pid->imax;
    }
    float derivative = (error - pid->last_error) / dt;
    pid->last_error = error;
    pid->output = pid->kp * error + pid->ki * pid->integral + pid->kd * derivative;
}
"#,
    r#"int NAME(int mode)
{
    switch (mode) {
    case 0: return puts("case {0}");
    case 1: return puts("escaped \"}\" quote");
    default: break;
    }
    return -1;
}
"#,
    r#"void NAME(mavlink_message_t *msg, uint8_t chan)
{
    // pack then send: { header, payload } */
    uint8_t buf[280];
    uint16_t len = mavlink_msg_to_send_buffer(buf, msg);
    comm_send_buffer((mavlink_channel_t)chan, buf, len);
    stats.sent++; stats.bytes += len;
}
"#,
    r#"const char *NAME(void)
{
    return R"json({"state": "armed", "checks": ["}"]})json";
}
"#,
    r#"bool NAME(const Vector3f &accel, uint32_t now_ms)
{
    static uint32_t last_ms;
    if (now_ms - last_ms < 100U) {
        return true;
    }
    last_ms = now_ms;
    const bool ok = accel.length() < 30.0f && !failsafe_active;
    if (!ok) { gcs_send_text(MAV_SEVERITY_CRITICAL, "PreArm: accel {bad}"); }
    return ok;
}
"#,
];

const CPP_CLASS: &str = r#"namespace ardu {

class NAME_Class : public Backend {
public:
    NAME_Class(int rate) : rate_hz_(rate), samples_{0}, Backend() {}
    ~NAME_Class() override { stop(); }

    int NAME(int n) const noexcept
    {
        int total = 0; // running sum }
        for (int i = 0; i < n; i++) { total += samples_[i] * rate_hz_; }
        return total;
    }

private:
    int rate_hz_;
    int samples_[8];
};

}
"#;

fn function_name(template: usize, instance: usize) -> String {
    const STEMS: &[&str] = &[
        "add_pair",
        "log_brace",
        "crc16_ccitt",
        "gps_distance",
        "pid_update",
        "mode_switch",
        "mav_finalize_send",
        "arming_state_json",
        "prearm_accel_check",
        "sample_total",
    ];
    format!("{}_{}", STEMS[template], instance)
}

/// 50 functions across `.c`, `.h`, and `.cpp` files: 45 from the C
/// templates and 5 class member functions. Every file also contains a
/// declaration and a call site of some other corpus name, neither of which
/// may be mistaken for a definition.
pub fn c_corpus() -> Vec<CorpusFile> {
    let mut files = Vec::new();
    for instance in 0..5 {
        for (ext, templates) in [("c", 0..5), ("h", 5..9)] {
            let mut text = String::from("/* generated corpus file { */\n#include <stdint.h>\n#include \"board.h\"\n\n");
            let mut functions = Vec::new();
            let decl_target = function_name((templates.start + 1) % C_TEMPLATES.len(), (instance + 1) % 5);
            text.push_str(&format!("int {decl_target}(int x);\n\n"));
            for t in templates {
                let name = function_name(t, instance);
                text.push_str(&C_TEMPLATES[t].replace("NAME", &name));
                text.push('\n');
                functions.push(name);
            }
            text.push_str(&format!(
                "int use_{ext}_{instance} = 0;\nstatic int (*fp_{instance})(int) = &{decl_target};\n"
            ));
            files.push(CorpusFile { path: format!("src/unit_{instance}.{ext}"), text, functions });
        }
        let name = function_name(9, instance);
        let cpp = CPP_CLASS.replace("NAME", &name);
        files.push(CorpusFile {
            path: format!("lib/class_{instance}.cpp"),
            text: format!("#include \"backend.h\"\n\n{cpp}"),
            functions: vec![name],
        });
    }
    files
}

/// Writes `files` under `root`.
pub fn write_corpus(root: &std::path::Path, files: &[CorpusFile]) -> std::io::Result<()> {
    for f in files {
        let path = root.join(&f.path);
        std::fs::create_dir_all(path.parent().expect("relative path has a parent"))?;
        std::fs::write(path, &f.text)?;
    }
    Ok(())
}
