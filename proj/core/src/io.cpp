#include "interfit/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace interfit {

using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, bool binary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  require_file(path);
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Little-endian scalar encoding independent of the host byte order.
template <class T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos, const fs::path& path) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  if (pos + sizeof(T) > in.size()) throw IoError("truncated file " + path.string());
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

std::string slurp(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path, true);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <class Fn>
auto json_field(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw IoError("unexpected content in " + path.string() + ": " + e.what());
  }
}

template <class V>
json vec_json(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class V>
void json_vec(const json& a, V& v) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != v.size())
    throw json::type_error::create(302, "array length mismatch", &a);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = a.at(i).get<double>();
}

json pose_json(const RigidTransform& p) {
  return json{{"rotation", vec_json(p.rotation)}, {"translation", vec_json(p.translation)}};
}

RigidTransform json_pose(const json& j) {
  RigidTransform p;
  json_vec(j.at("rotation"), p.rotation);
  json_vec(j.at("translation"), p.translation);
  return p;
}

}  // namespace

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing file " + path.string());
}

fs::path view_file(const fs::path& dir, int frame, int view, const std::string& ext) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04d", frame);
  return dir / name / ("view_" + std::to_string(view) + "." + ext);
}

// ---------------------------------------------------------------------------
// OBJ / XYZ

void write_obj(const fs::path& path, const TriMesh& mesh) {
  std::string s;
  for (const Vec3& v : mesh.vertices) s += "v " + fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()) + "\n";
  for (const Face& f : mesh.faces)
    s += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " +
         std::to_string(f[2] + 1) + "\n";
  write_text(path, s);
}

TriMesh read_obj(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  TriMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z()))
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
      if (idx.size() < 3)
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad face");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  for (const Face& f : m.faces)
    for (int i : f)
      if (i < 0 || i >= static_cast<int>(m.vertices.size()))
        throw IoError(path.string() + ": face index out of range");
  return m;
}

void write_xyz(const fs::path& path, const PointCloud& cloud) {
  std::string s;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    s += fmt(p.x()) + " " + fmt(p.y()) + " " + fmt(p.z()) + " " +
         std::string(label_name(cloud.labels[i])) + "\n";
  }
  write_text(path, s);
}

PointCloud read_xyz(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  PointCloud c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec3 p;
    std::string label;
    if (!(ls >> p.x() >> p.y() >> p.z() >> label))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected x y z label");
    try {
      c.labels.push_back(parse_label(label));
    } catch (const DomainError&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown label " + label);
    }
    c.points.push_back(p);
  }
  return c;
}

// ---------------------------------------------------------------------------
// PGM / DPT

void write_pgm(const fs::path& path, std::span<const Silhouette> masks) {
  std::string s;
  for (const Silhouette& m : masks) {
    s += "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
    for (float v : m.values) s.push_back(static_cast<char>(v > 0.5f ? 255 : 0));
  }
  write_text(path, s);
}

std::vector<Silhouette> read_pgm(const fs::path& path) {
  const std::string data = slurp(path);
  std::vector<Silhouette> out;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw IoError("malformed PGM header in " + path.string());
    return std::stoi(data.substr(start, pos - start));
  };
  while (true) {
    skip_space();
    if (pos >= data.size()) break;
    if (data.compare(pos, 2, "P5") != 0) throw IoError("not a binary PGM: " + path.string());
    pos += 2;
    const int w = number(), h = number(), maxval = number();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
      throw IoError("unsupported PGM dimensions in " + path.string());
    ++pos;  // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (pos + n > data.size()) throw IoError("truncated PGM " + path.string());
    Silhouette m(w, h);
    for (std::size_t i = 0; i < n; ++i)
      m.values[i] = static_cast<unsigned char>(data[pos + i]) * 2 > maxval ? 1.0f : 0.0f;
    pos += n;
    out.push_back(std::move(m));
  }
  return out;
}

void write_dpt(const fs::path& path, const DepthImage& depth) {
  std::string s;
  put_le<std::int32_t>(s, depth.width);
  put_le<std::int32_t>(s, depth.height);
  for (float v : depth.values) put_le<float>(s, v);
  write_text(path, s);
}

DepthImage read_dpt(const fs::path& path) {
  const std::string data = slurp(path);
  std::size_t pos = 0;
  const int w = get_le<std::int32_t>(data, pos, path);
  const int h = get_le<std::int32_t>(data, pos, path);
  if (w < 0 || h < 0) throw IoError("negative size in " + path.string());
  DepthImage d(w, h);
  if (data.size() != 8 + 4 * d.values.size()) throw IoError("size mismatch in " + path.string());
  for (float& v : d.values) v = get_le<float>(data, pos, path);
  return d;
}

// ---------------------------------------------------------------------------
// IFBM

namespace {

enum class Dtype : std::uint8_t { f64 = 0, i32 = 1, u8 = 2, u64 = 3 };

struct Array {
  Dtype type = Dtype::f64;
  std::vector<std::uint32_t> dims;
  std::vector<double> f;
  std::vector<std::int64_t> i;  // i32, u8 and u64 payloads

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

Array f64(const Eigen::MatrixXd& m) {
  Array a;
  a.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.f.push_back(m(r, c));
  return a;
}

Array f64(const std::vector<Vec3>& v) {
  Array a;
  a.dims = {static_cast<std::uint32_t>(v.size()), 3};
  for (const Vec3& p : v) a.f.insert(a.f.end(), {p.x(), p.y(), p.z()});
  return a;
}

Array ints(const std::vector<int>& v, std::uint32_t cols = 1, Dtype t = Dtype::i32) {
  Array a;
  a.type = t;
  a.dims = {static_cast<std::uint32_t>(v.size() / cols)};
  if (cols > 1) a.dims.push_back(cols);
  a.i.assign(v.begin(), v.end());
  return a;
}

}  // namespace

void write_body_model(const fs::path& path, const BodyModel& m) {
  std::vector<std::pair<std::string, Array>> arrays;
  arrays.emplace_back("template_vertices", f64(m.template_mesh.vertices));
  std::vector<int> faces;
  for (const Face& f : m.template_mesh.faces) faces.insert(faces.end(), f.begin(), f.end());
  arrays.emplace_back("template_faces", ints(faces, 3));
  std::string names;
  for (const auto& n : m.joint_names) names += n + "\n";
  arrays.emplace_back("joint_names", ints(std::vector<int>(names.begin(), names.end()), 1, Dtype::u8));
  arrays.emplace_back("parents", ints(m.parents));
  std::vector<int> classes;
  for (JointClass c : m.joint_classes) classes.push_back(static_cast<int>(c));
  arrays.emplace_back("joint_classes", ints(classes, 1, Dtype::u8));
  arrays.emplace_back("rest_joints", f64(m.rest_joints_base));
  arrays.emplace_back("shape_joint_basis", f64(m.shape_joint_basis));
  arrays.emplace_back("shape_vertex_basis", f64(m.shape_vertex_basis));
  arrays.emplace_back("skinning_weights", f64(m.skinning_weights));
  arrays.emplace_back("pose_decoder", f64(m.pose_decoder));
  arrays.emplace_back("decoded_joints", ints(m.decoded_joints));
  arrays.emplace_back("hand_joints", ints(m.hand_joints));
  arrays.emplace_back("face_joints", ints(m.face_joints));
  arrays.emplace_back("contact_region_ids", ints(m.contact_region_ids));
  arrays.emplace_back("marker_ids", ints(m.marker_ids));
  std::vector<int> lj;
  Eigen::MatrixXd lr(m.limit_joints.size(), 2);
  for (std::size_t k = 0; k < m.limit_joints.size(); ++k) {
    lj.insert(lj.end(), {m.limit_joints[k].joint, m.limit_joints[k].axis});
    lr(k, 0) = m.limit_joints[k].min;
    lr(k, 1) = m.limit_joints[k].max;
  }
  arrays.emplace_back("limit_joints", ints(lj, 2));
  arrays.emplace_back("limit_ranges", f64(lr));
  std::vector<int> sj;
  Eigen::MatrixXd sp(m.proxy_spheres.size(), 2);
  for (std::size_t k = 0; k < m.proxy_spheres.size(); ++k) {
    sj.insert(sj.end(), {m.proxy_spheres[k].joint, m.proxy_spheres[k].end});
    sp(k, 0) = m.proxy_spheres[k].fraction;
    sp(k, 1) = m.proxy_spheres[k].radius;
  }
  arrays.emplace_back("sphere_joints", ints(sj, 2));
  arrays.emplace_back("sphere_shapes", f64(sp));
  Array seed;
  seed.type = Dtype::u64;
  seed.dims = {1};
  seed.i = {static_cast<std::int64_t>(m.seed)};
  arrays.emplace_back("seed", seed);

  std::string s = "IFBM";
  put_le<std::uint32_t>(s, 1);  // version
  put_le<std::uint32_t>(s, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, a] : arrays) {
    put_le<std::uint16_t>(s, static_cast<std::uint16_t>(name.size()));
    s += name;
    put_le<std::uint8_t>(s, static_cast<std::uint8_t>(a.type));
    put_le<std::uint32_t>(s, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_le<std::uint32_t>(s, d);
    switch (a.type) {
      case Dtype::f64:
        for (double v : a.f) put_le<double>(s, v);
        break;
      case Dtype::i32:
        for (auto v : a.i) put_le<std::int32_t>(s, static_cast<std::int32_t>(v));
        break;
      case Dtype::u8:
        for (auto v : a.i) put_le<std::uint8_t>(s, static_cast<std::uint8_t>(v));
        break;
      case Dtype::u64:
        for (auto v : a.i) put_le<std::uint64_t>(s, static_cast<std::uint64_t>(v));
        break;
    }
  }
  write_text(path, s);
}

BodyModel read_body_model(const fs::path& path) {
  const std::string data = slurp(path);
  if (data.compare(0, 4, "IFBM") != 0) throw IoError("not an IFBM file: " + path.string());
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(data, pos, path);
  if (version != 1) throw IoError("unsupported IFBM version in " + path.string());
  const auto count = get_le<std::uint32_t>(data, pos, path);
  std::map<std::string, Array> arrays;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get_le<std::uint16_t>(data, pos, path);
    if (pos + len > data.size()) throw IoError("truncated file " + path.string());
    const std::string name = data.substr(pos, len);
    pos += len;
    Array a;
    const auto type = get_le<std::uint8_t>(data, pos, path);
    if (type > 3) throw IoError("unknown array type in " + path.string());
    a.type = static_cast<Dtype>(type);
    const auto ndim = get_le<std::uint32_t>(data, pos, path);
    if (ndim > 4) throw IoError("bad array rank in " + path.string());
    for (std::uint32_t d = 0; d < ndim; ++d) a.dims.push_back(get_le<std::uint32_t>(data, pos, path));
    const std::size_t n = a.count();
    for (std::size_t e = 0; e < n; ++e) {
      switch (a.type) {
        case Dtype::f64: a.f.push_back(get_le<double>(data, pos, path)); break;
        case Dtype::i32: a.i.push_back(get_le<std::int32_t>(data, pos, path)); break;
        case Dtype::u8: a.i.push_back(get_le<std::uint8_t>(data, pos, path)); break;
        case Dtype::u64:
          a.i.push_back(static_cast<std::int64_t>(get_le<std::uint64_t>(data, pos, path)));
          break;
      }
    }
    arrays[name] = std::move(a);
  }

  auto get = [&](const std::string& name, Dtype t) -> const Array& {
    auto it = arrays.find(name);
    if (it == arrays.end() || it->second.type != t)
      throw IoError("IFBM file " + path.string() + " lacks array " + name);
    return it->second;
  };
  auto matrix = [&](const std::string& name) {
    const Array& a = get(name, Dtype::f64);
    const std::uint32_t rows = a.dims.empty() ? 0 : a.dims[0];
    const std::uint32_t cols = a.dims.size() > 1 ? a.dims[1] : 1;
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = a.f[static_cast<std::size_t>(r) * cols + c];
    return m;
  };
  auto points = [&](const std::string& name) {
    const Eigen::MatrixXd m = matrix(name);
    std::vector<Vec3> v(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) v[r] = m.row(r).transpose();
    return v;
  };
  auto int_list = [&](const std::string& name, Dtype t = Dtype::i32) {
    const Array& a = get(name, t);
    return std::vector<int>(a.i.begin(), a.i.end());
  };

  BodyModel m;
  m.template_mesh.vertices = points("template_vertices");
  const auto faces = int_list("template_faces");
  for (std::size_t k = 0; k + 2 < faces.size(); k += 3)
    m.template_mesh.faces.push_back({faces[k], faces[k + 1], faces[k + 2]});
  m.template_mesh.watertight = false;
  const auto names = int_list("joint_names", Dtype::u8);
  std::string cur;
  for (int c : names) {
    if (c == '\n') {
      m.joint_names.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  m.parents = int_list("parents");
  for (int c : int_list("joint_classes", Dtype::u8)) m.joint_classes.push_back(static_cast<JointClass>(c));
  m.rest_joints_base = points("rest_joints");
  m.shape_joint_basis = matrix("shape_joint_basis");
  m.shape_vertex_basis = matrix("shape_vertex_basis");
  m.skinning_weights = matrix("skinning_weights");
  m.pose_decoder = matrix("pose_decoder");
  m.decoded_joints = int_list("decoded_joints");
  m.hand_joints = int_list("hand_joints");
  m.face_joints = int_list("face_joints");
  m.contact_region_ids = int_list("contact_region_ids");
  m.marker_ids = int_list("marker_ids");
  const auto lj = int_list("limit_joints");
  const Eigen::MatrixXd lr = matrix("limit_ranges");
  for (std::size_t k = 0; 2 * k + 1 < lj.size(); ++k)
    m.limit_joints.push_back({lj[2 * k], lj[2 * k + 1], lr(k, 0), lr(k, 1)});
  const auto sj = int_list("sphere_joints");
  const Eigen::MatrixXd sp = matrix("sphere_shapes");
  for (std::size_t k = 0; 2 * k + 1 < sj.size(); ++k)
    m.proxy_spheres.push_back({sj[2 * k], sj[2 * k + 1], sp(k, 0), sp(k, 1)});
  m.seed = static_cast<std::uint64_t>(get("seed", Dtype::u64).i.at(0));
  m.finalize();
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw IoError("invalid body model in " + path.string() + ": " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// JSON documents

void write_cameras(const fs::path& path, std::span<const PinholeCamera> cameras) {
  json a = json::array();
  for (const PinholeCamera& c : cameras)
    a.push_back({{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
                 {"height", c.height}, {"extrinsic", pose_json(c.extrinsic)}});
  write_json(path, json{{"cameras", a}});
}

std::vector<PinholeCamera> read_cameras(const fs::path& path) {
  const json j = read_json(path);
  return json_field(path, [&] {
    std::vector<PinholeCamera> out;
    for (const json& c : j.at("cameras")) {
      PinholeCamera cam;
      cam.fx = c.at("fx").get<double>();
      cam.fy = c.at("fy").get<double>();
      cam.cx = c.at("cx").get<double>();
      cam.cy = c.at("cy").get<double>();
      cam.width = c.at("width").get<int>();
      cam.height = c.at("height").get<int>();
      cam.extrinsic = json_pose(c.at("extrinsic"));
      out.push_back(cam);
    }
    return out;
  });
}

void write_keypoints(const fs::path& path, const KeypointDetection& kp) {
  json a = json::array();
  for (const Keypoint& k : kp.joints) a.push_back({k.position.x(), k.position.y(), k.confidence});
  write_json(path, json{{"joints", a}});
}

KeypointDetection read_keypoints(const fs::path& path) {
  const json j = read_json(path);
  return json_field(path, [&] {
    KeypointDetection kp;
    for (const json& k : j.at("joints")) {
      Keypoint p;
      p.position = Vec2(k.at(0).get<double>(), k.at(1).get<double>());
      p.confidence = k.at(2).get<double>();
      kp.joints.push_back(p);
    }
    return kp;
  });
}

void write_fitted(const fs::path& path, const FittedSequence& f) {
  json frames = json::array();
  for (int t = 0; t < f.frame_count(); ++t) {
    const BodyParams& p = f.frames[t];
    json fr{{"theta_b", vec_json(p.theta_b)}, {"theta_h", vec_json(p.theta_h)},
            {"theta_f", vec_json(p.theta_f)}, {"psi", vec_json(p.psi)},
            {"gamma", vec_json(p.gamma)}};
    fr["xi"] = t < f.object.size() ? vec_json(f.object.xi[t].as_vector()) : json::array();
    fr["coasting"] = t < f.object.size() ? static_cast<int>(f.object.coasting[t]) : 0;
    if (t < static_cast<int>(f.frame_energy.size())) fr["energy"] = f.frame_energy[t];
    frames.push_back(fr);
  }
  json diag = json::object();
  for (const auto& [k, v] : f.diagnostics) diag[k] = v;
  write_json(path, json{{"beta_star", vec_json(f.beta_star)},
                        {"frames", frames},
                        {"q", f.schedule.q},
                        {"diagnostics", diag}});
}

FittedSequence read_fitted(const fs::path& path) {
  const json j = read_json(path);
  return json_field(path, [&] {
    FittedSequence f;
    json_vec(j.at("beta_star"), f.beta_star);
    bool has_object = true;
    for (const json& fr : j.at("frames")) {
      BodyParams p;
      p.beta = f.beta_star;
      json_vec(fr.at("theta_b"), p.theta_b);
      json_vec(fr.at("theta_h"), p.theta_h);
      json_vec(fr.at("theta_f"), p.theta_f);
      json_vec(fr.at("psi"), p.psi);
      json_vec(fr.at("gamma"), p.gamma);
      f.frames.push_back(p);
      if (fr.at("xi").empty()) {
        has_object = false;
      } else {
        Eigen::Matrix<double, 6, 1> xi;
        json_vec(fr.at("xi"), xi);
        f.object.xi.push_back(RigidTransform::from_vector(xi));
        f.object.coasting.push_back(static_cast<std::uint8_t>(fr.value("coasting", 0)));
      }
      if (fr.contains("energy")) f.frame_energy.push_back(fr.at("energy").get<double>());
    }
    if (!has_object) f.object = {};
    f.schedule.q = j.at("q").get<std::vector<std::uint8_t>>();
    for (const auto& [k, v] : j.at("diagnostics").items()) f.diagnostics[k] = v.get<double>();
    return f;
  });
}

void write_trajectory(const fs::path& path, const ObjectTrajectory& trajectory,
                      const std::vector<std::vector<int>>& selected) {
  json frames = json::array();
  for (int t = 0; t < trajectory.size(); ++t) {
    json fr{{"xi", vec_json(trajectory.xi[t].as_vector())},
            {"coasting", static_cast<int>(trajectory.coasting[t])}};
    if (t < static_cast<int>(selected.size())) fr["selected"] = selected[t];
    frames.push_back(fr);
  }
  write_json(path, json{{"frames", frames}});
}

ObjectTrajectory read_trajectory(const fs::path& path, std::vector<std::vector<int>>* selected) {
  const json j = read_json(path);
  return json_field(path, [&] {
    ObjectTrajectory tr;
    if (selected) selected->clear();
    for (const json& fr : j.at("frames")) {
      Eigen::Matrix<double, 6, 1> xi;
      json_vec(fr.at("xi"), xi);
      tr.xi.push_back(RigidTransform::from_vector(xi));
      tr.coasting.push_back(static_cast<std::uint8_t>(fr.at("coasting").get<int>()));
      if (selected) selected->push_back(fr.value("selected", std::vector<int>{}));
    }
    return tr;
  });
}

void write_contacts(const fs::path& path, const ContactAnnotation& annotation,
                    const ContactSchedule& schedule) {
  write_json(path, json{{"body_vertex_ids", annotation.body_vertex_ids},
                        {"object_vertex_ids", annotation.object_vertex_ids},
                        {"q", schedule.q}});
}

void read_contacts(const fs::path& path, ContactAnnotation& annotation, ContactSchedule& schedule) {
  const json j = read_json(path);
  json_field(path, [&] {
    annotation.body_vertex_ids = j.at("body_vertex_ids").get<std::vector<int>>();
    annotation.object_vertex_ids = j.at("object_vertex_ids").get<std::vector<int>>();
    schedule.q = j.at("q").get<std::vector<std::uint8_t>>();
    return 0;
  });
}

void write_object_model(const fs::path& dir, const ObjectModel& object) {
  write_obj(dir / "object.obj", object.mesh);
  write_json(dir / "object.json", json{{"name", object.name},
                                       {"watertight", object.mesh.watertight},
                                       {"contact_vertex_ids", object.contact_vertex_ids}});
}

ObjectModel read_object_model(const fs::path& dir) {
  ObjectModel o;
  o.mesh = read_obj(dir / "object.obj");
  const json j = read_json(dir / "object.json");
  json_field(dir / "object.json", [&] {
    o.name = j.at("name").get<std::string>();
    o.mesh.watertight = j.at("watertight").get<bool>();
    o.contact_vertex_ids = j.at("contact_vertex_ids").get<std::vector<int>>();
    return 0;
  });
  try {
    o.validate();
  } catch (const DomainError& e) {
    throw IoError("invalid object model in " + dir.string() + ": " + e.what());
  }
  return o;
}

void write_pose(const fs::path& path, const RigidTransform& pose) {
  write_json(path, pose_json(pose));
}

RigidTransform read_pose(const fs::path& path) {
  const json j = read_json(path);
  return json_field(path, [&] { return json_pose(j); });
}

void write_scenario(const fs::path& path, const Scenario& sc, const NoiseConfig& noise) {
  json body = json::array();
  for (const BodyKeyframe& k : sc.body_keys) {
    const BodyParams& p = k.params;
    body.push_back({{"frame", k.frame},
                    {"theta_b", vec_json(p.theta_b)},
                    {"theta_h", vec_json(p.theta_h)},
                    {"gamma", vec_json(p.gamma)}});
  }
  json object = json::array();
  for (const ObjectKeyframe& k : sc.object_keys)
    object.push_back({{"frame", k.frame}, {"pose", pose_json(k.pose)}});
  json window = nullptr;
  if (sc.contact_window) window = {sc.contact_window->first, sc.contact_window->second};
  write_json(path,
             json{{"name", sc.name},
                  {"object", {{"kind", object_kind_name(sc.object.kind)},
                              {"dims", vec_json(sc.object.dims)},
                              {"segments", sc.object.segments}}},
                  {"frames", sc.frames},
                  {"beta", vec_json(sc.beta)},
                  {"body_keys", body},
                  {"object_keys", object},
                  {"contact_window", window},
                  {"right_hand_grasp", sc.right_hand_grasp},
                  {"rig", {{"count", sc.rig.count}, {"radius", sc.rig.radius},
                           {"height", sc.rig.height}, {"target", vec_json(sc.rig.target)},
                           {"focal", sc.rig.focal}, {"width", sc.rig.width},
                           {"height_px", sc.rig.height_px}, {"phase", sc.rig.phase}}},
                  {"cloud_stride", sc.cloud_stride},
                  {"noise", {{"keypoint_sigma_px", noise.keypoint_sigma_px},
                             {"keypoint_dropout", noise.keypoint_dropout},
                             {"depth_sigma_m", noise.depth_sigma_m},
                             {"mask_px", noise.mask_px},
                             {"distractors", noise.distractors},
                             {"init_rotation_deg", noise.init_rotation_deg},
                             {"init_translation_m", noise.init_translation_m},
                             {"seed", noise.seed}}}});
}

// ---------------------------------------------------------------------------
// Sequence directories

void write_sequence(const fs::path& dir, const SyntheticSequence& seq, const Scenario& scenario,
                    const NoiseConfig& noise, const BodyModel& body, const ObjectModel& object) {
  const SequenceObservation& obs = seq.observation;
  fs::create_directories(dir);
  write_cameras(dir / "cameras.json", obs.cameras);
  write_fitted(dir / "gt.json", seq.ground_truth);
  write_scenario(dir / "scenario.json", scenario, noise);
  write_contacts(dir / "contacts.json", seq.annotation, seq.ground_truth.schedule);
  write_pose(dir / "object_init.json", seq.object_init);
  write_object_model(dir, object);
  write_body_model(dir / "body.ifbm", body);
  for (int t = 0; t < obs.frame_count(); ++t) {
    for (int v = 0; v < obs.view_count(); ++v) {
      const ViewObservation& view = obs.frames[t].views[v];
      write_pgm(view_file(dir, t, v, "pgm"), view.candidates);
      write_dpt(view_file(dir, t, v, "dpt"), view.depth);
      write_keypoints(view_file(dir, t, v, "kp.json"), view.keypoints);
      write_xyz(view_file(dir, t, v, "xyz"), view.cloud);
    }
  }
}

SequenceObservation read_observation(const fs::path& dir) {
  SequenceObservation obs;
  obs.cameras = read_cameras(dir / "cameras.json");
  const int views = obs.view_count();
  for (int t = 0;; ++t) {
    if (!fs::exists(view_file(dir, t, 0, "pgm").parent_path())) break;
    FrameObservation frame;
    for (int v = 0; v < views; ++v) {
      ViewObservation view;
      view.candidates = read_pgm(view_file(dir, t, v, "pgm"));
      view.depth = read_dpt(view_file(dir, t, v, "dpt"));
      view.keypoints = read_keypoints(view_file(dir, t, v, "kp.json"));
      view.cloud = read_xyz(view_file(dir, t, v, "xyz"));
      frame.views.push_back(std::move(view));
    }
    obs.frames.push_back(std::move(frame));
  }
  if (obs.frames.empty()) throw IoError("no frames in " + dir.string());
  for (const ViewObservation& view : obs.frames.front().views)
    for (std::size_t i = 0; i < view.cloud.size(); ++i)
      if (view.cloud.labels[i] == SegmentLabel::ground)
        obs.ground_points.push_back(view.cloud.points[i]);
  try {
    obs.validate();
  } catch (const DomainError& e) {
    throw IoError("invalid sequence in " + dir.string() + ": " + e.what());
  }
  return obs;
}

}  // namespace interfit
