#include "dpd/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dpd {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'D', 'S'};

[[noreturn]] void fail_at(const std::string& path, std::size_t offset, const std::string& what) {
  std::ostringstream os;
  os << path << ": " << what << " at byte offset " << offset;
  throw std::runtime_error(os.str());
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error(path + ": cannot open for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits);
  }

 private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error(path + ": cannot open for reading");
  }
  std::size_t offset() const { return offset_; }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), n);
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail_at(path_, offset_, "truncated file (wanted " + std::to_string(n) + " bytes)");
    offset_ += n;
  }
  std::uint16_t u16() { return le<std::uint16_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  double f64() {
    std::uint64_t bits = le<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  const std::string& path() const { return path_; }

 private:
  template <typename T>
  T le() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace

std::size_t Record::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

void write_records(const std::string& path, const std::vector<Record>& records) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  w.u32(0);  // reserved
  for (const Record& r : records) {
    if (r.name.size() > 0xffff) throw std::invalid_argument("write_records: record name too long");
    std::size_t n = r.element_count();
    if (r.dtype == Record::Dtype::f64 ? r.f64_data.size() != n : r.u32_data.size() != n)
      throw std::invalid_argument("write_records: record '" + r.name +
                                  "' payload does not match dims");
    w.u16(static_cast<std::uint16_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    std::uint8_t tag = static_cast<std::uint8_t>(r.dtype);
    w.bytes(&tag, 1);
    std::uint8_t rank = static_cast<std::uint8_t>(r.dims.size());
    w.bytes(&rank, 1);
    for (std::uint32_t d : r.dims) w.u32(d);
    if (r.dtype == Record::Dtype::f64) {
      for (double v : r.f64_data) w.f64(v);
    } else {
      for (std::uint32_t v : r.u32_data) w.u32(v);
    }
  }
}

std::vector<Record> read_records(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail_at(path, 0, "bad magic (expected \"DPDS\")");
  std::uint32_t version = r.u32();
  if (version != kContainerVersion)
    fail_at(path, 4, "unsupported version " + std::to_string(version));
  std::uint32_t count = r.u32();
  r.u32();  // reserved

  std::vector<Record> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    std::uint16_t name_len = r.u16();
    rec.name.resize(name_len);
    r.bytes(rec.name.data(), name_len);
    std::uint8_t tag, rank;
    r.bytes(&tag, 1);
    r.bytes(&rank, 1);
    if (tag > 1) fail_at(path, r.offset() - 2, "unknown dtype tag " + std::to_string(tag));
    rec.dtype = static_cast<Record::Dtype>(tag);
    rec.dims.resize(rank);
    for (std::uint8_t d = 0; d < rank; ++d) rec.dims[d] = r.u32();
    std::size_t n = rec.element_count();
    if (rec.dtype == Record::Dtype::f64) {
      rec.f64_data.resize(n);
      for (std::size_t j = 0; j < n; ++j) rec.f64_data[j] = r.f64();
    } else {
      rec.u32_data.resize(n);
      for (std::size_t j = 0; j < n; ++j) rec.u32_data[j] = r.u32();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_param_tree(const std::string& path, const ParamTree& params) {
  std::vector<Record> records;
  for (const auto& [name, t] : params) {
    Record r;
    r.name = name;
    r.dtype = Record::Dtype::f64;
    for (std::size_t d : t.shape()) r.dims.push_back(static_cast<std::uint32_t>(d));
    r.f64_data = t.data();
    records.push_back(std::move(r));
  }
  write_records(path, records);
}

ParamTree load_param_tree(const std::string& path) {
  ParamTree params;
  for (Record& r : read_records(path)) {
    if (r.dtype != Record::Dtype::f64)
      throw std::runtime_error(path + ": record '" + r.name + "' is not f64");
    std::vector<std::size_t> shape(r.dims.begin(), r.dims.end());
    params[r.name] = Tensor(std::move(shape), std::move(r.f64_data));
  }
  return params;
}

void save_image_set(const std::string& path, const std::vector<ImageSample>& images,
                    std::size_t height, std::size_t width, const std::vector<std::size_t>& modes) {
  std::size_t hw = height * width;
  Record px;
  px.name = "images";
  px.dims = {static_cast<std::uint32_t>(images.size()), static_cast<std::uint32_t>(height),
             static_cast<std::uint32_t>(width)};
  px.f64_data.reserve(images.size() * hw);
  Record labels;
  labels.name = "labels";
  labels.dtype = Record::Dtype::u32;
  labels.dims = {static_cast<std::uint32_t>(images.size())};
  for (const ImageSample& s : images) {
    if (s.pixels.size() != hw)
      throw std::invalid_argument("save_image_set: pixel size does not match H*W");
    px.f64_data.insert(px.f64_data.end(), s.pixels.begin(), s.pixels.end());
    labels.u32_data.push_back(static_cast<std::uint32_t>(s.label));
  }
  std::vector<Record> records{std::move(px), std::move(labels)};
  if (!modes.empty()) {
    if (modes.size() != images.size())
      throw std::invalid_argument("save_image_set: mode count does not match image count");
    Record m;
    m.name = "modes";
    m.dtype = Record::Dtype::u32;
    m.dims = {static_cast<std::uint32_t>(modes.size())};
    for (std::size_t v : modes) m.u32_data.push_back(static_cast<std::uint32_t>(v));
    records.push_back(std::move(m));
  }
  write_records(path, records);
}

LoadedImageSet load_image_set(const std::string& path) {
  LoadedImageSet out;
  std::vector<Record> records = read_records(path);
  const Record* px = nullptr;
  const Record* labels = nullptr;
  const Record* modes = nullptr;
  for (const Record& r : records) {
    if (r.name == "images") px = &r;
    if (r.name == "labels") labels = &r;
    if (r.name == "modes") modes = &r;
  }
  if (!px || !labels || px->dims.size() != 3)
    throw std::runtime_error(path + ": not an image set container");
  std::size_t n = px->dims[0];
  out.height = px->dims[1];
  out.width = px->dims[2];
  std::size_t hw = out.height * out.width;
  out.images.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.images[i].pixels.assign(px->f64_data.begin() + i * hw, px->f64_data.begin() + (i + 1) * hw);
    out.images[i].label = labels->u32_data[i];
  }
  if (modes) out.modes.assign(modes->u32_data.begin(), modes->u32_data.end());
  return out;
}

std::string content_hash(const void* data, std::size_t size) {
  const unsigned char* b = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for hashing");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string s = buf.str();
  return content_hash(s.data(), s.size());
}

}  // namespace dpd
