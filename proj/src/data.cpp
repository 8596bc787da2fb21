#include "udepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "udepth/config.hpp"

namespace udepth {

namespace {

using Vec3 = std::array<double, 3>;

struct Palette {
  Vec3 near;
  Vec3 far;
  Vec3 ground_near;
  Vec3 ground_far;
  Vec3 sky;
  Vec3 object;
  double texture = 0.0;
};

Palette palette_for(ColorDomain d) {
  switch (d) {
    case ColorDomain::kRealA:
      return {{0.62, 0.42, 0.28}, {0.50, 0.58, 0.70}, {0.34, 0.32, 0.30}, {0.58, 0.58, 0.60},
              {0.78, 0.87, 0.96}, {0.85, 0.12, 0.20}, 0.22};
    case ColorDomain::kRealB:
      return {{0.22, 0.30, 0.48}, {0.46, 0.40, 0.32}, {0.18, 0.20, 0.24}, {0.36, 0.36, 0.40},
              {0.58, 0.60, 0.64}, {0.90, 0.75, 0.10}, 0.22};
    case ColorDomain::kSynthetic:
      return {{0.85, 0.60, 0.15}, {0.25, 0.72, 0.50}, {0.52, 0.46, 0.34}, {0.70, 0.64, 0.52},
              {0.45, 0.68, 1.00}, {0.95, 0.35, 0.35}, 0.0};
  }
  throw InvalidInput("unknown colour domain");
}

Vec3 lerp(const Vec3& a, const Vec3& b, double s) {
  return {a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s, a[2] + (b[2] - a[2]) * s};
}

// Depth cue used by the palettes: log-distance from 3 m to 60 m mapped to [0,1].
double depth_cue(double z) { return std::clamp(std::log(std::max(z, 1e-3) / 3.0) / std::log(20.0), 0.0, 1.0); }

constexpr double kPi = 3.14159265358979323846;
constexpr double kWave1 = 1.5;
constexpr double kWave2 = 2.3;

// Attenuates texture whose projected wavelength drops below ~3 px.
double fade(double wavelength_px) { return std::clamp((wavelength_px - 6.0) / 6.0, 0.0, 1.0); }

double rect_texture(double a, double b, const Vec3& phase, double fx, double z) {
  const double f1 = fade(kWave1 * fx / z);
  const double f2 = fade(kWave2 * fx / z);
  return 0.6 * f1 * std::sin(2 * kPi * a / kWave1 + phase[0]) * std::sin(2 * kPi * b / kWave1 + phase[1]) +
         0.4 * f2 * std::sin(2 * kPi * (0.8 * a + 0.6 * b) / kWave2 + phase[2]);
}

double ground_texture(double x, double z, const Vec3& phase, double fx, double fy, double h) {
  const double across = fade(kWave1 * fx / z) * std::sin(2 * kPi * x / kWave1 + phase[0]);
  const double along_wave = 3.0;
  const double along = fade(along_wave * fy * h / (z * z)) * std::sin(2 * kPi * z / along_wave + phase[1]);
  return 0.6 * across + 0.4 * along;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  enum class Kind { kSky, kGround, kRect } kind = Kind::kSky;
  const ToyRect* rect = nullptr;
  Vec3 point{};
};

Hit cast_ray(const ToyGeometry& g, const Vec3& origin, const Vec3& dir, int frame) {
  Hit best;
  if (g.has_ground && dir[1] > 0.0) {
    const double t = (g.camera_height - origin[1]) / dir[1];
    const double z = origin[2] + t * dir[2];
    if (t > 0.0 && z > 0.0 && z <= g.ground_far) {
      best.t = t;
      best.kind = Hit::Kind::kGround;
      best.point = {origin[0] + t * dir[0], g.camera_height, z};
    }
  }
  for (const auto& r : g.rects) {
    Vec3 off{0.0, 0.0, 0.0};
    if (r.moving) {
      off = {frame * g.object_motion[0], frame * g.object_motion[1], frame * g.object_motion[2]};
    }
    double t = 0.0;
    if (r.normal == ToyRect::Normal::kZ) {
      t = (r.plane + off[2] - origin[2]) / dir[2];
    } else {
      if (std::abs(dir[0]) < 1e-12) {
        continue;
      }
      t = (r.plane + off[0] - origin[0]) / dir[0];
    }
    if (!(t > 0.0) || t >= best.t) {
      continue;
    }
    const Vec3 p{origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]};
    const double a = r.normal == ToyRect::Normal::kZ ? p[0] - off[0] : p[2] - off[2];
    const double b = p[1] - off[1];
    if (a >= r.u[0] && a <= r.u[1] && b >= r.v[0] && b <= r.v[1]) {
      best.t = t;
      best.kind = Hit::Kind::kRect;
      best.rect = &r;
      best.point = p;
    }
  }
  return best;
}

Vec3 shade(const Hit& hit, const ToyGeometry& g, const Palette& pal, const Intrinsics& K, int frame) {
  if (hit.kind == Hit::Kind::kSky) {
    return pal.sky;
  }
  const auto& p = hit.point;
  Vec3 base;
  double tex = 0.0;
  if (hit.kind == Hit::Kind::kGround) {
    base = lerp(pal.ground_near, pal.ground_far, depth_cue(p[2]));
    tex = ground_texture(p[0], p[2], g.ground_phase, K.fx, K.fy, g.camera_height);
  } else {
    const auto& r = *hit.rect;
    Vec3 off{0.0, 0.0, 0.0};
    if (r.moving) {
      off = {frame * g.object_motion[0], frame * g.object_motion[1], frame * g.object_motion[2]};
    }
    // Surface coordinates are attached to the rectangle so texture moves with it.
    const double a = r.normal == ToyRect::Normal::kZ ? p[0] - off[0] : p[2] - off[2];
    const double b = p[1] - off[1];
    // The colour cue uses the rectangle's own depth so moving objects keep their colour.
    const double cue_z = r.normal == ToyRect::Normal::kZ ? r.plane : p[2] - off[2];
    base = r.moving ? pal.object : lerp(pal.near, pal.far, depth_cue(cue_z));
    tex = rect_texture(a, b, r.phase, K.fx, std::max(cue_z, 1e-3));
  }
  const double m = 1.0 + pal.texture * tex;
  return {std::clamp(base[0] * m, 0.0, 1.0), std::clamp(base[1] * m, 0.0, 1.0), std::clamp(base[2] * m, 0.0, 1.0)};
}

RealSample make_real(const ToySceneSpec& spec, const ToyGeometry& g, ToyScene& scene) {
  const auto& v = g.camera_motion;
  auto prev = render_toy_view(spec, g, spec.domain, {-v[0], -v[1], -v[2]}, -1);
  auto target = render_toy_view(spec, g, spec.domain, {0.0, 0.0, 0.0}, 0);
  auto next = render_toy_view(spec, g, spec.domain, v, 1);
  auto stereo = render_toy_view(spec, g, spec.domain, {spec.baseline_m, 0.0, 0.0}, 0);
  RealSample s;
  s.id = "scene_" + std::to_string(spec.seed);
  s.prev = prev.color;
  s.target = target.color;
  s.next = next.color;
  s.stereo = stereo.color;
  s.K = spec.intrinsics();
  s.stereo_pose = RigidPose::from_translation(torch::tensor({{-spec.baseline_m, 0.0, 0.0}}, torch::kFloat32));
  s.sky = target.sky;
  s.gt_depth = target.depth;
  s.object_mask = target.object_mask;
  scene.pose_to_prev = RigidPose::from_translation(torch::tensor({{v[0], v[1], v[2]}}, torch::kFloat32));
  scene.pose_to_next = RigidPose::from_translation(torch::tensor({{-v[0], -v[1], -v[2]}}, torch::kFloat32));
  return s;
}

SyntheticSample make_synthetic(const ToySceneSpec& spec, const ToyGeometry& g) {
  auto view = render_toy_view(spec, g, ColorDomain::kSynthetic, {0.0, 0.0, 0.0}, 0);
  SyntheticSample s;
  s.id = "syn_" + std::to_string(spec.seed);
  s.source = "toy";
  s.color = view.color;
  s.depth = view.depth;
  s.sky = view.sky;
  return s;
}

cv::Mat to_mat_rgb(const torch::Tensor& image) {
  require(image.dim() == 3 && image.size(0) == 3, "write_rgb: expected [3,H,W]");
  auto hwc = (image.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .flip({2})  // RGB -> BGR
                 .contiguous();
  cv::Mat m(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3);
  std::memcpy(m.data, hwc.data_ptr<uint8_t>(), hwc.numel());
  return m;
}

void write_png(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), m)) {
    throw IoError("cannot write image " + path.string());
  }
}

cv::Mat read_png(const fs::path& path, int flags) {
  if (!fs::exists(path)) {
    throw IoError("missing file " + path.string());
  }
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) {
    throw IoError("unreadable or corrupt image " + path.string());
  }
  return m;
}

double units_to_meters(const std::string& units) {
  if (units == "meters" || units == "m") return 1.0;
  if (units == "centimeters" || units == "cm") return 0.01;
  if (units == "millimeters" || units == "mm") return 0.001;
  throw InvalidInput("unknown depth units '" + units + "'");
}

torch::Tensor resize_map(const torch::Tensor& t, int64_t h, int64_t w, int interpolation) {
  if (t.size(1) == h && t.size(2) == w) {
    return t;
  }
  auto hwc = t.permute({1, 2, 0}).contiguous().to(torch::kFloat32);
  const int c = static_cast<int>(t.size(0));
  cv::Mat src(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_32FC(c), hwc.data_ptr<float>());
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, interpolation);
  auto out = torch::from_blob(dst.data, {h, w, c}, torch::kFloat32).clone();
  return out.permute({2, 0, 1}).contiguous();
}

std::vector<std::string> read_split(const fs::path& file) {
  std::istringstream in(read_text_file(file));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
    if (!line.empty() && line[0] != '#') {
      ids.push_back(line);
    }
  }
  return ids;
}

void write_split(const fs::path& file, const std::vector<std::string>& ids) {
  std::string text;
  for (const auto& id : ids) {
    text += id + "\n";
  }
  write_text_file(file, text);
}

}  // namespace

std::string to_string(ColorDomain d) {
  switch (d) {
    case ColorDomain::kRealA:
      return "real_a";
    case ColorDomain::kRealB:
      return "real_b";
    case ColorDomain::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

ColorDomain color_domain_from_string(const std::string& s) {
  if (s == "real_a") return ColorDomain::kRealA;
  if (s == "real_b") return ColorDomain::kRealB;
  if (s == "synthetic") return ColorDomain::kSynthetic;
  throw InvalidInput("unknown colour domain '" + s + "'");
}

void ToySceneSpec::validate() const {
  require(min_depth > 0.0 && min_depth < max_depth, "ToySceneSpec: need 0 < min_depth < max_depth");
  require(near_m >= min_depth && far_m <= max_depth && near_m < far_m,
          "ToySceneSpec: depth range must lie inside [min_depth, max_depth]");
  require(baseline_m > 0.0, "ToySceneSpec: baseline must be positive");
  require(height >= 8 && width >= 8, "ToySceneSpec: image too small");
  require(num_boxes >= 0, "ToySceneSpec: negative box count");
  require(supersample >= 1, "ToySceneSpec: supersample must be >= 1");
}

Intrinsics ToySceneSpec::intrinsics() const {
  const double f = 0.6 * static_cast<double>(width);
  return {f, f, 0.5 * static_cast<double>(width), 0.5 * static_cast<double>(height), width, height};
}

ToyGeometry sample_toy_geometry(const ToySceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + 17);
  auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto phase = [&]() { return Vec3{U(0, 2 * kPi), U(0, 2 * kPi), U(0, 2 * kPi)}; };
  ToyGeometry g;
  g.ground_phase = phase();
  g.camera_motion = spec.fixed_camera_motion ? spec.camera_motion : Vec3{U(-0.15, 0.15), 0.0, U(0.5, 1.0)};
  g.object_motion = spec.moving_object ? spec.object_motion : Vec3{0.0, 0.0, 0.0};
  const double h = g.camera_height;
  for (double side : {-1.0, 1.0}) {
    if (U(0.0, 1.0) < 0.7) {
      ToyRect facade;
      facade.normal = ToyRect::Normal::kX;
      facade.plane = side * U(4.5, 7.0);
      facade.u = {U(3.0, 10.0), U(35.0, 60.0)};
      facade.v = {h - U(5.0, 12.0), h};
      facade.phase = phase();
      g.rects.push_back(facade);
    }
  }
  for (int i = 0; i < spec.num_boxes; ++i) {
    ToyRect box;
    box.plane = U(spec.near_m, spec.far_m);
    const double cx = U(-5.0, 5.0);
    const double half = 0.5 * U(1.0, 3.5);
    box.u = {cx - half, cx + half};
    box.v = {h - U(1.0, 4.0), h};
    box.phase = phase();
    g.rects.push_back(box);
  }
  if (spec.moving_object) {
    ToyRect obj;
    obj.moving = true;
    obj.plane = U(8.0, 12.0);
    const double cx = U(-1.5, 1.5);
    obj.u = {cx - 1.0, cx + 1.0};
    obj.v = {h - 1.6, h};
    obj.phase = phase();
    g.rects.push_back(obj);
  }
  return g;
}

ToyView render_toy_view(const ToySceneSpec& spec, const ToyGeometry& g, ColorDomain domain, const Vec3& camera,
                        int frame) {
  const auto K = spec.intrinsics();
  const auto pal = palette_for(domain);
  const int64_t H = spec.height;
  const int64_t W = spec.width;
  const int s = spec.supersample;
  auto color = torch::zeros({3, H, W}, torch::kFloat32);
  auto depth = torch::zeros({1, H, W}, torch::kFloat32);
  auto sky = torch::zeros({1, H, W}, torch::kFloat32);
  auto object = torch::zeros({1, H, W}, torch::kFloat32);
  auto c = color.accessor<float, 3>();
  auto d = depth.accessor<float, 3>();
  auto m = sky.accessor<float, 3>();
  auto o = object.accessor<float, 3>();
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      const Vec3 centre_dir{(x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0};
      const auto centre = cast_ray(g, camera, centre_dir, frame);
      if (centre.kind == Hit::Kind::kSky) {
        d[0][y][x] = static_cast<float>(spec.max_depth);
        m[0][y][x] = 1.0f;
      } else {
        d[0][y][x] = static_cast<float>(std::clamp(centre.t, spec.min_depth, spec.max_depth));
        o[0][y][x] = centre.rect != nullptr && centre.rect->moving ? 1.0f : 0.0f;
      }
      Vec3 acc{0.0, 0.0, 0.0};
      for (int sy = 0; sy < s; ++sy) {
        for (int sx = 0; sx < s; ++sx) {
          const double px = x + (sx + 0.5) / s - 0.5;
          const double py = y + (sy + 0.5) / s - 0.5;
          const Vec3 dir{(px - K.cx) / K.fx, (py - K.cy) / K.fy, 1.0};
          const auto rgb = shade(cast_ray(g, camera, dir, frame), g, pal, K, frame);
          for (int k = 0; k < 3; ++k) {
            acc[k] += rgb[k];
          }
        }
      }
      for (int k = 0; k < 3; ++k) {
        c[k][y][x] = static_cast<float>(acc[k] / (s * s));
      }
    }
  }
  return {color, depth, sky, object};
}

ToyScene generate_toy_scene(const ToySceneSpec& spec) {
  ToyScene scene;
  scene.geometry = sample_toy_geometry(spec);
  scene.real = make_real(spec, scene.geometry, scene);
  scene.synthetic = make_synthetic(spec, scene.geometry);
  return scene;
}

ToyScene generate_plane_scene(const ToySceneSpec& spec, double depth_m) {
  spec.validate();
  require(depth_m > spec.min_depth && depth_m < spec.max_depth, "generate_plane_scene: depth outside range");
  Rng rng(spec.seed + 1);
  std::uniform_real_distribution<double> U(0.0, 2 * kPi);
  ToyScene scene;
  auto& g = scene.geometry;
  g.has_ground = false;
  g.camera_motion = spec.fixed_camera_motion ? spec.camera_motion : Vec3{0.2, 0.0, 0.0};
  ToyRect plane;
  plane.plane = depth_m;
  plane.u = {-1e4, 1e4};
  plane.v = {-1e4, 1e4};
  plane.phase = {U(rng), U(rng), U(rng)};
  g.rects.push_back(plane);
  scene.real = make_real(spec, g, scene);
  scene.synthetic = make_synthetic(spec, g);
  return scene;
}

torch::Tensor read_rgb(const fs::path& path) {
  auto m = read_png(path, cv::IMREAD_COLOR);
  if (m.depth() != CV_8U || m.channels() != 3) {
    throw IoError("expected an 8-bit RGB image: " + path.string());
  }
  auto t = torch::from_blob(m.data, {m.rows, m.cols, 3}, torch::kUInt8).clone();
  return t.flip({2}).permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

void write_rgb(const fs::path& path, const torch::Tensor& image) { write_png(path, to_mat_rgb(image)); }

torch::Tensor read_depth(const fs::path& path, double scale) {
  require(scale > 0.0, "read_depth: scale must be positive");
  auto m = read_png(path, cv::IMREAD_UNCHANGED);
  if (m.depth() != CV_16U || m.channels() != 1) {
    throw IoError("expected a 16-bit single-channel depth image: " + path.string());
  }
  auto t = torch::from_blob(m.data, {1, m.rows, m.cols}, torch::kUInt16).to(torch::kInt32).clone();
  return t.to(torch::kFloat32).div(scale);
}

void write_depth(const fs::path& path, const torch::Tensor& depth, double scale) {
  require(depth.dim() == 3 && depth.size(0) == 1, "write_depth: expected [1,H,W]");
  auto v = (depth.detach().to(torch::kFloat64) * scale).round().clamp(0, 65535).to(torch::kInt32).contiguous();
  cv::Mat m(static_cast<int>(depth.size(1)), static_cast<int>(depth.size(2)), CV_16UC1);
  auto acc = v.accessor<int32_t, 3>();
  for (int r = 0; r < m.rows; ++r) {
    for (int col = 0; col < m.cols; ++col) {
      m.at<uint16_t>(r, col) = static_cast<uint16_t>(acc[0][r][col]);
    }
  }
  write_png(path, m);
}

torch::Tensor read_mask(const fs::path& path) {
  auto m = read_png(path, cv::IMREAD_GRAYSCALE);
  auto t = torch::from_blob(m.data, {1, m.rows, m.cols}, torch::kUInt8).clone();
  return (t > 0).to(torch::kFloat32);
}

void write_mask(const fs::path& path, const torch::Tensor& mask) {
  require(mask.dim() == 3 && mask.size(0) == 1, "write_mask: expected [1,H,W]");
  auto v = ((mask.detach() > 0.5).to(torch::kUInt8) * 255).contiguous();
  cv::Mat m(static_cast<int>(mask.size(1)), static_cast<int>(mask.size(2)), CV_8UC1);
  std::memcpy(m.data, v.data_ptr<uint8_t>(), v.numel());
  write_png(path, m);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : parse_key_values(read_text_file(path), path.string())) {
    out[k] = v.value;
  }
  return out;
}

void write_real_samples(const fs::path& root, const std::string& split, const std::vector<RealSample>& samples,
                        double depth_scale) {
  require(!samples.empty(), "write_real_samples: no samples");
  const auto dir = root / "real";
  const auto& K = samples.front().K;
  const auto intr = dir / "intrinsics.txt";
  if (fs::exists(intr) && !(Intrinsics::from_text(read_text_file(intr)) == K)) {
    throw InvalidInput("write_real_samples: intrinsics differ from " + intr.string());
  }
  write_text_file(intr, K.to_text());
  std::ostringstream meta;
  meta << "depth_scale = " << depth_scale << "\nheight = " << samples.front().height()
       << "\nwidth = " << samples.front().width() << "\n";
  write_text_file(dir / "meta.txt", meta.str());
  std::vector<std::string> ids;
  for (const auto& s : samples) {
    s.validate();
    require(s.K == K, "write_real_samples: samples must share intrinsics");
    const auto fdir = dir / "frames" / s.id;
    write_rgb(fdir / "prev.png", s.prev);
    write_rgb(fdir / "target.png", s.target);
    write_rgb(fdir / "next.png", s.next);
    if (s.has_stereo()) {
      write_rgb(fdir / "stereo.png", s.stereo);
      write_text_file(fdir / "stereo_pose.txt", s.stereo_pose.to_text());
    }
    if (s.gt_depth.defined()) {
      write_depth(fdir / "depth.png", s.gt_depth, depth_scale);
    }
    if (s.object_mask.defined()) {
      write_mask(fdir / "object.png", s.object_mask);
    }
    if (s.sky.defined()) {
      write_mask(dir / "sky" / (s.id + ".png"), s.sky);
    }
    ids.push_back(s.id);
  }
  write_split(dir / "splits" / (split + ".txt"), ids);
}

std::vector<RealSample> load_real_split(const fs::path& root, const std::string& split) {
  const auto dir = root / "real";
  if (!fs::exists(dir)) {
    throw IoError("dataset directory not found: " + dir.string());
  }
  const auto K = Intrinsics::from_text(read_text_file(dir / "intrinsics.txt"));
  const auto meta = read_key_values(dir / "meta.txt");
  const double scale = meta.count("depth_scale") ? parse_double(meta.at("depth_scale"), "depth_scale") : kDepthPngScale;
  std::vector<RealSample> out;
  for (const auto& id : read_split(dir / "splits" / (split + ".txt"))) {
    const auto fdir = dir / "frames" / id;
    RealSample s;
    s.id = id;
    s.K = K;
    s.prev = read_rgb(fdir / "prev.png");
    s.target = read_rgb(fdir / "target.png");
    s.next = read_rgb(fdir / "next.png");
    if (fs::exists(fdir / "stereo.png")) {
      s.stereo = read_rgb(fdir / "stereo.png");
      s.stereo_pose = RigidPose::from_text(read_text_file(fdir / "stereo_pose.txt"));
    }
    if (fs::exists(fdir / "depth.png")) {
      s.gt_depth = read_depth(fdir / "depth.png", scale);
    }
    if (fs::exists(fdir / "object.png")) {
      s.object_mask = read_mask(fdir / "object.png");
    }
    s.sky = load_sky_mask(dir / "sky", id, s.height(), s.width());
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

torch::Tensor load_sky_mask(const fs::path& sky_dir, const std::string& id, int64_t height, int64_t width) {
  const auto path = sky_dir / (id + ".png");
  if (!fs::exists(path)) {
    return torch::zeros({1, height, width});
  }
  auto m = read_mask(path);
  if (m.size(1) != height || m.size(2) != width) {
    throw InvalidInput("sky mask " + path.string() + " is " + std::to_string(m.size(1)) + "x" +
                       std::to_string(m.size(2)) + ", image is " + std::to_string(height) + "x" +
                       std::to_string(width));
  }
  return m;
}

torch::Tensor sky_mask_provider(const RealSample& sample) {
  if (sample.sky.defined()) {
    return sample.sky;
  }
  return torch::zeros({1, sample.height(), sample.width()});
}

torch::Tensor sky_mask_provider(const SyntheticSample& sample) {
  if (sample.sky.defined()) {
    return sample.sky;
  }
  return torch::zeros({1, sample.color.size(1), sample.color.size(2)});
}

double SyntheticSourceInfo::to_meters() const { return units_to_meters(depth_units); }

SyntheticSourceInfo register_synthetic_source(const fs::path& dir) {
  const auto meta = read_key_values(dir / "meta.txt");
  SyntheticSourceInfo info;
  info.root = dir;
  info.name = meta.count("name") ? meta.at("name") : dir.filename().string();
  if (!meta.count("depth_units")) {
    throw InvalidInput("synthetic source " + dir.string() + " does not declare depth_units");
  }
  info.depth_units = meta.at("depth_units");
  units_to_meters(info.depth_units);
  info.depth_scale = meta.count("depth_scale") ? parse_double(meta.at("depth_scale"), "depth_scale") : 1.0;
  require(info.depth_scale > 0.0, "synthetic source " + dir.string() + ": depth_scale must be positive");
  info.height = meta.count("height") ? parse_int(meta.at("height"), "height") : 0;
  info.width = meta.count("width") ? parse_int(meta.at("width"), "width") : 0;
  require(info.height > 0 && info.width > 0, "synthetic source " + dir.string() + " must declare height and width");
  return info;
}

std::vector<SyntheticSample> load_synthetic_source(const SyntheticSourceInfo& info) {
  std::vector<SyntheticSample> out;
  const double to_m = info.to_meters();
  for (const auto& id : read_split(info.root / "splits" / "train.txt")) {
    const auto dir = info.root / id;
    SyntheticSample s;
    s.id = id;
    s.source = info.name;
    s.color = read_rgb(dir / "color.png");
    s.depth = read_depth(dir / "depth.png", info.depth_scale) * to_m;
    s.sky = fs::exists(dir / "sky.png") ? read_mask(dir / "sky.png") : torch::zeros({1, s.color.size(1), s.color.size(2)});
    out.push_back(std::move(s));
  }
  return out;
}

void write_synthetic_source(const fs::path& dir, const std::string& name, const std::vector<SyntheticSample>& samples,
                            const std::string& depth_units, double depth_scale, int64_t out_height, int64_t out_width) {
  require(!samples.empty(), "write_synthetic_source: no samples");
  const double to_m = units_to_meters(depth_units);
  const int64_t h = out_height > 0 ? out_height : samples.front().color.size(1);
  const int64_t w = out_width > 0 ? out_width : samples.front().color.size(2);
  std::ostringstream meta;
  meta << "name = " << name << "\ndepth_units = " << depth_units << "\ndepth_scale = " << depth_scale
       << "\nheight = " << h << "\nwidth = " << w << "\n";
  write_text_file(dir / "meta.txt", meta.str());
  std::vector<std::string> ids;
  for (const auto& s : samples) {
    const auto sdir = dir / s.id;
    write_rgb(sdir / "color.png", resize_map(s.color, h, w, cv::INTER_AREA));
    write_depth(sdir / "depth.png", resize_map(s.depth, h, w, cv::INTER_NEAREST) / to_m, depth_scale);
    if (s.sky.defined()) {
      write_mask(sdir / "sky.png", resize_map(s.sky, h, w, cv::INTER_NEAREST));
    }
    ids.push_back(s.id);
  }
  write_split(dir / "splits" / "train.txt", ids);
}

std::vector<SyntheticSample> unify_synthetic(const std::vector<std::vector<SyntheticSample>>& sources,
                                             const UnifyOptions& options) {
  require(options.min_depth > 0.0 && options.min_depth < options.max_depth, "unify_synthetic: bad depth range");
  std::vector<SyntheticSample> pool;
  for (const auto& source : sources) {
    for (const auto& s : source) {
      SyntheticSample u = s;
      u.color = resize_map(s.color, options.height, options.width, cv::INTER_AREA).clamp(0.0, 1.0);
      u.depth = resize_map(s.depth, options.height, options.width, cv::INTER_NEAREST)
                    .clamp(options.min_depth, options.max_depth);
      u.sky = resize_map(sky_mask_provider(s), options.height, options.width, cv::INTER_NEAREST);
      u.validate();
      pool.push_back(std::move(u));
    }
  }
  Rng rng(options.seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

std::vector<SyntheticSample> unify_synthetic(const std::vector<SyntheticSourceInfo>& sources,
                                             const UnifyOptions& options) {
  std::vector<std::vector<SyntheticSample>> loaded;
  for (const auto& info : sources) {
    loaded.push_back(load_synthetic_source(info));
  }
  return unify_synthetic(loaded, options);
}

std::vector<PlannedStep> epoch_scheduler(int64_t real_len, int64_t syn_len, int64_t epochs, uint64_t seed,
                                         SyntheticExhaustion policy) {
  require(real_len > 0 && syn_len > 0, "epoch_scheduler: stream lengths must be positive");
  require(epochs > 0, "epoch_scheduler: epochs must be positive");
  Rng rng(seed);
  std::vector<int64_t> syn_order(syn_len);
  std::iota(syn_order.begin(), syn_order.end(), 0);
  std::shuffle(syn_order.begin(), syn_order.end(), rng);
  std::vector<int64_t> real_order(real_len);
  std::vector<PlannedStep> plan;
  plan.reserve(static_cast<size_t>(real_len * epochs));
  int64_t cursor = 0;
  int64_t pass = 0;
  for (int64_t e = 0; e < epochs; ++e) {
    std::iota(real_order.begin(), real_order.end(), 0);
    std::shuffle(real_order.begin(), real_order.end(), rng);
    for (int64_t r = 0; r < real_len; ++r) {
      if (cursor == syn_len) {
        cursor = 0;
        ++pass;
        if (policy == SyntheticExhaustion::kReshuffle) {
          std::shuffle(syn_order.begin(), syn_order.end(), rng);
        }
      }
      plan.push_back({static_cast<int64_t>(plan.size()), e, real_order[r], syn_order[cursor], pass});
      ++cursor;
    }
  }
  return plan;
}

}  // namespace udepth
