//! Scenarios shipped with the binary, selected by `--builtin NAME`.

pub const BUILTINS: &[(&str, &str)] = &[
    ("constant_sliding", CONSTANT_SLIDING),
    ("crossing_tower", CROSSING_TOWER),
    ("fold_visible", FOLD_VISIBLE),
    ("fold_invisible", FOLD_INVISIBLE),
    ("cusp_visible", CUSP_VISIBLE),
    ("fold_fold_B1", FOLD_FOLD_B1),
    ("relay_focus", RELAY_FOCUS),
    ("sliding_circle", SLIDING_CIRCLE),
    ("escaping_demo", ESCAPING_DEMO),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

const CONSTANT_SLIDING: &str = r#"# Attracting sliding plane with zero sliding vector field.
name = "constant_sliding"
dimension = 3
X = "0, 0, -1"
Y = "0, 0, 1"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task classify { points = [[0.2, 0.1, 0], [0, 0, 0.5], [0, 0, -0.5]] }
task simulate { p0 = [0.2, 0.1, 0.5]  T = 2 }
"#;

const CROSSING_TOWER: &str = r#"# Three parallel switching planes, all crossed upward.
name = "crossing_tower"
dimension = 3
X = "0.1, 0, 1"
Y = "0, 0.1, 1"
h = "x3^3 - x3"
domain.lo = [-2, -2, -2]
domain.hi = [2, 2, 2]

task validate {}
task simulate { p0 = [0, 0, -1.5]  T = 3 }
"#;

const FOLD_VISIBLE: &str = r#"# Visible fold line of X at x1 = 0 bounding an attracting sliding half-plane.
name = "fold_visible"
dimension = 3
X = "1, 0, x1"
Y = "0, 0, 1"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task classify { points = [[0, 0, 0], [-0.5, 0, 0], [0.5, 0, 0]] }
task simulate { p0 = [-0.8, 0, 0.2]  T = 1.5 }
"#;

const FOLD_INVISIBLE: &str = r#"# Invisible fold line of X at x1 = 0.
name = "fold_invisible"
dimension = 3
X = "1, 0, -x1"
Y = "0, 0, 1"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task classify { points = [[0, 0, 0]] }
task simulate { p0 = [-0.5, 0, -0.3]  T = 1.2 }
"#;

const CUSP_VISIBLE: &str = r#"# Cusp of X at the origin.
name = "cusp_visible"
dimension = 3
X = "1, 0, x2 + x1^2"
Y = "0, 0, 1"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task classify { points = [[0, 0, 0]] }
task simulate { p0 = [-0.5, -0.3, 0.1]  T = 1.5 }
"#;

const FOLD_FOLD_B1: &str = r#"# Visible fold line of X touching an invisible fold curve of Y at the
# origin; the curves are tangent, so no escaping region appears.
name = "fold_fold_B1"
dimension = 3
X = "1, 0, x1"
Y = "1, 0, x1 + x2^2"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task classify { points = [[0, 0, 0]] }
task simulate { p0 = [-0.6, 0.3, 0.1]  T = 1 }
"#;

const RELAY_FOCUS: &str = r#"# Focus of X at (0, 1) above a relay line; the orbit through the fold
# at (0.2, 0) returns to the sliding segment.
name = "relay_focus"
dimension = 2
X = "0.2*x1 - x2 + 1, x1 + 0.2*x2 - 0.2"
Y = "0, 1"
h = "x2"
domain.lo = [-4.9, -1.2]
domain.hi = [2.5, 4.2]

task validate {}
task simulate { p0 = [0, 2.6]  T = 30 }
task detect {
  anchor = [0, 2.5]
  normal = [-1, 0]
  radius = 1.3
  sense = positive
  window = 1
  seed = [0, 2.6]
  tcap = 40
  maxIter = 50
}
task conley {
  resolution = 64
  tauFraction = 0.3333333333333333
  bloat = 1
  samples = 3
}
task regularize { eps = [0.1, 0.05, 0.025, 0.0125]  tcap = 60 }
"#;

const SLIDING_CIRCLE: &str = r#"# The unit circle is an attracting sliding cycle.
name = "sliding_circle"
dimension = 2
X = "-x1 - x2, x1 - x2"
Y = "x1 - x2, x1 + x2"
h = "x1^2 + x2^2 - 1"
domain.lo = [-2, -2]
domain.hi = [2, 2]

task validate {}
task simulate { p0 = [1.5, 0]  T = 10 }
task detect {
  anchor = [1, 0]
  normal = [0, 1]
  radius = 0.5
  sense = positive
  seed = [1, 0]
  tcap = 20
}
"#;

const ESCAPING_DEMO: &str = r#"# Both fields point away from the plane: every point of it is escaping.
name = "escaping_demo"
dimension = 3
X = "0, 0, 1"
Y = "0, 0, -1"
h = "x3"
domain.lo = [-1, -1, -1]
domain.hi = [1, 1, 1]

task validate {}
task simulate { p0 = [0, 0, 0.5]  T = 1 }
"#;
