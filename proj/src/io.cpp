#include "tensoria/io.hpp"

#include "tensoria/errors.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tensoria {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'T', 'E', 'N', 'S', 'O', 'R', '1'};
constexpr const char* kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("truncated tensor file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Index rows, Index cols) {
  if (!j.is_array() || j.size() != rows) throw IoError("matrix has wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols) throw IoError("matrix has wrong column count");
    for (Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw IoError("matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

json nested_json(const DenseTensor& t, Index level, Index offset) {
  json arr = json::array();
  const Index n = t.shape()[level];
  Index block = 1;
  for (Index k = level + 1; k < t.order(); ++k) block *= t.shape()[k];
  for (Index i = 0; i < n; ++i) {
    if (level + 1 == t.order())
      arr.push_back(t.data()[offset + i]);
    else
      arr.push_back(nested_json(t, level + 1, offset + i * block));
  }
  return arr;
}

void flatten_nested(const json& j, const std::vector<Index>& dims, Index level, std::vector<double>& out) {
  if (!j.is_array() || j.size() != dims[level]) throw IoError("nested array does not match declared dims");
  for (const auto& e : j) {
    if (level + 1 == dims.size()) {
      if (!e.is_number()) throw IoError("array entries must be numbers");
      out.push_back(e.get<double>());
    } else {
      flatten_nested(e, dims, level + 1, out);
    }
  }
}

DenseTensor tensor_from_nested(const json& j, const std::vector<Index>& dims) {
  std::vector<double> data;
  flatten_nested(j, dims, 0, data);
  return DenseTensor(Shape(dims), std::move(data));
}

std::vector<Index> index_list(const json& j, const char* what) {
  if (!j.is_array()) throw IoError(std::string(what) + " must be an array");
  std::vector<Index> out;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<long long>() < 0) throw IoError(std::string(what) + " must hold nonnegative integers");
    out.push_back(e.get<Index>());
  }
  return out;
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(bytes[i]) << 16) | (std::uint8_t(bytes[i + 1]) << 8) | std::uint8_t(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = std::uint8_t(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= std::uint8_t(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  int table[256];
  std::fill(std::begin(table), std::end(table), -1);
  for (int k = 0; k < 64; ++k) table[static_cast<unsigned char>(kAlphabet[k])] = k;
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char c : text) {
    if (c == '=') {
      ++pad;
      continue;
    }
    if (c == '\n' || c == '\r' || c == ' ') continue;
    if (pad > 0) throw IoError("base64: data after padding");
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) throw IoError("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  return out;
}

json tensor_to_json(const DenseTensor& t, bool base64) {
  json j;
  j["order"] = t.order();
  j["dims"] = t.shape().dims();
  j["layout"] = "row-major";
  if (base64) {
    std::string bytes;
    bytes.reserve(t.size() * 8);
    for (double x : t.data()) put_le(bytes, x);
    j["encoding"] = "base64";
    j["data"] = base64_encode(bytes);
  } else {
    j["encoding"] = "array";
    j["data"] = t.data();
  }
  return j;
}

DenseTensor tensor_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dims") || !j.contains("data")) throw IoError("tensor JSON needs dims and data");
  const auto dims = index_list(j["dims"], "dims");
  if (j.contains("order") && j["order"].get<Index>() != dims.size()) throw IoError("order differs from dims length");
  if (j.contains("layout") && j["layout"] != "row-major") throw IoError("only row-major layout is supported");
  const Shape shape(dims);
  std::vector<double> data;
  const auto& d = j["data"];
  if (d.is_string()) {
    const std::string bytes = base64_decode(d.get<std::string>());
    if (bytes.size() != shape.size() * 8) throw IoError("base64 payload has wrong length");
    std::size_t pos = 0;
    data.resize(shape.size());
    for (double& x : data) x = get_le<double>(bytes, pos);
  } else if (d.is_array()) {
    for (const auto& e : d) {
      if (!e.is_number()) throw IoError("data entries must be numbers");
      data.push_back(e.get<double>());
    }
  } else {
    throw IoError("data must be a base64 string or an array");
  }
  if (data.size() != shape.size()) throw IoError("data length differs from dims");
  for (double x : data)
    if (!std::isfinite(x)) throw IoError("tensor data must be finite");
  return DenseTensor(shape, std::move(data));
}

void write_tensor_dt1(const std::filesystem::path& path, const DenseTensor& t) {
  std::string bytes(kMagic, 8);
  put_le(bytes, static_cast<std::uint32_t>(t.order()));
  for (Index n : t.shape().dims()) put_le(bytes, static_cast<std::uint32_t>(n));
  for (double x : t.data()) put_le(bytes, x);
  write_file(path, bytes);
}

void write_tensor_json(const std::filesystem::path& path, const DenseTensor& t, bool base64) {
  write_file(path, tensor_to_json(t, base64).dump() + "\n");
}

void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  if (path.extension() == ".dt1")
    write_tensor_dt1(path, t);
  else
    write_tensor_json(path, t);
}

DenseTensor read_tensor(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0) {
    std::size_t pos = 8;
    const auto order = get_le<std::uint32_t>(bytes, pos);
    if (order == 0) throw IoError("tensor order must be >= 1");
    std::vector<Index> dims;
    for (std::uint32_t k = 0; k < order; ++k) dims.push_back(get_le<std::uint32_t>(bytes, pos));
    Shape shape = [&] {
      try {
        return Shape(dims);
      } catch (const ShapeError& e) {
        throw IoError(std::string("bad dims: ") + e.what());
      }
    }();
    if (bytes.size() - pos != shape.size() * 8) throw IoError("payload length differs from dims");
    std::vector<double> data(shape.size());
    for (double& x : data) x = get_le<double>(bytes, pos);
    for (double x : data)
      if (!std::isfinite(x)) throw IoError("tensor data must be finite");
    return DenseTensor(std::move(shape), std::move(data));
  }
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw IoError(std::string("not a DT1 file: ") + e.what());
  }
  try {
    return tensor_from_json(j);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed tensor JSON: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("malformed tensor JSON: ") + e.what());
  }
}

json lowrank_to_json(const LowRank& x) {
  struct V {
    json operator()(const CPTensor& c) const {
      json j{{"format", "cp"}, {"shape", c.shape().dims()}, {"ranks", {c.rank()}}};
      json f = json::array();
      for (const auto& U : c.factors()) f.push_back(matrix_json(U));
      j["factors"] = f;
      j["weights"] = std::vector<double>(c.weights().data(), c.weights().data() + c.weights().size());
      return j;
    }
    json operator()(const TuckerTensor& t) const {
      json j{{"format", "tucker"}, {"shape", t.shape().dims()}, {"ranks", t.ranks()}};
      json f = json::array();
      for (const auto& U : t.factors()) f.push_back(matrix_json(U));
      j["factors"] = f;
      j["core"] = nested_json(t.core(), 0, 0);
      return j;
    }
    json operator()(const TTTensor& t) const {
      json j{{"format", "tt"}, {"shape", t.shape().dims()}, {"ranks", t.ranks()}};
      json c = json::array();
      for (const auto& core : t.cores()) c.push_back(nested_json(core, 0, 0));
      j["cores"] = c;
      return j;
    }
    json operator()(const TreeTensor& t) const {
      json j{{"format", "tree"}, {"shape", t.shape().dims()}, {"ranks", t.ranks()}};
      json modes = json::array();
      for (const auto& n : t.tree().nodes()) modes.push_back(n.modes.modes());
      j["tree"] = {{"parents", t.tree().parent_list()}, {"modes", modes}};
      json leaves = json::array(), transfers = json::array();
      for (Index i = 0; i < t.tree().num_nodes(); ++i) {
        if (t.tree().is_leaf(i)) {
          leaves.push_back(matrix_json(t.leaf_basis(i)));
          transfers.push_back(nullptr);
        } else {
          leaves.push_back(nullptr);
          transfers.push_back(matrix_json(t.transfer_matrix(i)));
        }
      }
      j["leaf_bases"] = leaves;
      j["transfers"] = transfers;
      return j;
    }
  };
  return std::visit(V{}, x);
}

LowRank lowrank_from_json(const json& j) {
  try {
    const std::string fmt = j.at("format").get<std::string>();
    const Shape shape(index_list(j.at("shape"), "shape"));
    const Index d = shape.order();
    if (fmt == "cp") {
      const auto ranks = index_list(j.at("ranks"), "ranks");
      if (ranks.size() != 1) throw IoError("cp needs one rank");
      const auto& f = j.at("factors");
      if (!f.is_array() || f.size() != d) throw IoError("cp needs d factors");
      std::vector<Eigen::MatrixXd> factors;
      for (Index nu = 0; nu < d; ++nu) factors.push_back(matrix_from_json(f[nu], shape[nu], ranks[0]));
      std::optional<Eigen::VectorXd> w;
      if (j.contains("weights")) {
        const auto wv = j["weights"].get<std::vector<double>>();
        w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(wv.size()));
      }
      return CPTensor(shape, std::move(factors), w);
    }
    if (fmt == "tucker") {
      const auto ranks = index_list(j.at("ranks"), "ranks");
      if (ranks.size() != d) throw IoError("tucker needs d ranks");
      const auto& f = j.at("factors");
      if (!f.is_array() || f.size() != d) throw IoError("tucker needs d factors");
      std::vector<Eigen::MatrixXd> factors;
      for (Index nu = 0; nu < d; ++nu) factors.push_back(matrix_from_json(f[nu], shape[nu], ranks[nu]));
      return TuckerTensor(shape, tensor_from_nested(j.at("core"), ranks), std::move(factors));
    }
    if (fmt == "tt") {
      const auto ranks = index_list(j.at("ranks"), "ranks");
      if (ranks.size() + 1 != d) throw IoError("tt needs d-1 ranks");
      const auto& c = j.at("cores");
      if (!c.is_array() || c.size() != d) throw IoError("tt needs d cores");
      std::vector<DenseTensor> cores;
      for (Index k = 0; k < d; ++k) {
        const Index a = k == 0 ? 1 : ranks[k - 1];
        const Index b = k + 1 == d ? 1 : ranks[k];
        cores.push_back(tensor_from_nested(c[k], {a, shape[k], b}));
      }
      return TTTensor(shape, std::move(cores));
    }
    if (fmt == "tree") {
      const auto& tj = j.at("tree");
      const auto parents = tj.at("parents").get<std::vector<long>>();
      std::vector<ModeSet> modes;
      for (const auto& m : tj.at("modes")) modes.emplace_back(index_list(m, "modes"));
      DimensionTree tree(modes, parents);
      if (tree.parent_list() != parents) throw IoError("tree nodes must be listed breadth-first");
      for (Index i = 0; i < modes.size(); ++i)
        if (tree.node(i).modes != modes[i]) throw IoError("tree nodes must be listed breadth-first");
      const auto ranks = index_list(j.at("ranks"), "ranks");
      if (ranks.size() != tree.num_nodes()) throw IoError("tree needs one rank per node");
      const auto& lj = j.at("leaf_bases");
      const auto& cj = j.at("transfers");
      std::map<Index, Eigen::MatrixXd> leaves;
      std::map<Index, DenseTensor> transfers;
      for (Index i = 0; i < tree.num_nodes(); ++i) {
        if (tree.is_leaf(i)) {
          leaves[i] = matrix_from_json(lj.at(i), shape[tree.node(i).modes.front()], ranks[i]);
        } else {
          std::vector<Index> dims{ranks[i]};
          Index cols = 1;
          for (Index c : tree.node(i).children) {
            dims.push_back(ranks[c]);
            cols *= ranks[c];
          }
          const Eigen::MatrixXd m = matrix_from_json(cj.at(i), ranks[i], cols);
          std::vector<double> data;
          for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
          transfers.emplace(i, DenseTensor(Shape(dims), std::move(data)));
        }
      }
      return TreeTensor(std::move(tree), shape, ranks, std::move(leaves), std::move(transfers));
    }
    throw IoError("unknown format " + fmt);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed low-rank JSON: ") + e.what());
  }
}

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {
// JSON text with every double printed at 17 significant digits
void dump17(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump17(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ',';
        first = false;
        dump17(e, out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt17(v) : "null";
      break;
    }
    default: out += j.dump();
  }
}
}  // namespace

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::string out;
  dump17(j, out);
  write_file(path, out + "\n");
}

void write_lowrank(const std::filesystem::path& path, const LowRank& x) { write_json_file(path, lowrank_to_json(x)); }

LowRank read_lowrank(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError(std::string("cannot parse ") + path.string() + ": " + e.what());
  }
  return lowrank_from_json(j);
}

}  // namespace tensoria
