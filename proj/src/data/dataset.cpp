#include "wxembed/data/dataset.hpp"

#include <array>
#include <cstring>

#include "wxembed/core/binary_io.hpp"
#include "wxembed/core/error.hpp"

namespace wxe {

namespace {

using FE = FormatError;

nlohmann::json header_json(const Dataset& ds) {
  nlohmann::json h;
  h["format_version"] = 1;
  h["grid"] = {{"n_lat", ds.grid.n_lat}, {"n_lon", ds.grid.n_lon}};
  h["catalog"] = to_json(ds.catalog);
  h["n_times"] = ds.n_times();
  h["start"] = format_hour(ds.start);
  h["step_hours"] = ds.step_hours;
  h["seed"] = ds.seed ? nlohmann::json(*ds.seed) : nlohmann::json(nullptr);
  h["stats_included"] = ds.stats.has_value();
  if (ds.stats) h["stats"] = to_json(*ds.stats);
  h["has_mask"] = ds.mask.has_value();
  return h;
}

struct ParsedHeader {
  Dataset meta;
  std::size_t n_times = 0;
  bool has_mask = false;
};

ParsedHeader parse_header(std::span<const std::byte> bytes) {
  ParsedHeader out;
  try {
    const auto h = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                         reinterpret_cast<const char*>(bytes.data()) + bytes.size());
    if (h.at("format_version").get<int>() != 1) throw FE(FE::Kind::BadHeader, "unsupported format_version");
    out.meta.grid.n_lat = h.at("grid").at("n_lat").get<std::size_t>();
    out.meta.grid.n_lon = h.at("grid").at("n_lon").get<std::size_t>();
    out.meta.grid.validate();
    out.meta.catalog = catalog_from_json(h.at("catalog"));
    out.n_times = h.at("n_times").get<std::size_t>();
    out.meta.start = parse_hour(h.at("start").get<std::string>());
    out.meta.step_hours = h.at("step_hours").get<int>();
    if (!h.at("seed").is_null()) out.meta.seed = h.at("seed").get<std::uint64_t>();
    if (h.at("stats_included").get<bool>()) out.meta.stats = clim_stats_from_json(h.at("stats"));
    out.has_mask = h.at("has_mask").get<bool>();
  } catch (const FE&) {
    throw;
  } catch (const std::exception& e) {
    throw FE(FE::Kind::BadHeader, std::string("invalid dataset header: ") + e.what());
  }
  return out;
}

std::uint64_t payload_bytes(const ParsedHeader& p) {
  return static_cast<std::uint64_t>(p.n_times) * p.meta.catalog.size() * p.meta.grid.cells() * sizeof(float);
}

void check_magic(std::span<const std::byte> b) {
  if (b.size() < 4 || std::memcmp(b.data(), kDatasetMagic, 4) != 0) {
    throw FE(FE::Kind::BadMagic, "not a WXD1 dataset (bad magic)");
  }
}

std::uint64_t expected_size(std::uint64_t header_len, const ParsedHeader& p) {
  return 4 + 8 + header_len + payload_bytes(p) + (p.has_mask ? p.meta.grid.cells() : 0) + 8;
}

void check_size(std::uint64_t actual, std::uint64_t expected) {
  if (actual < expected) {
    throw FE(FE::Kind::Truncated, "dataset truncated: " + std::to_string(actual) + " bytes, expected " +
                                      std::to_string(expected));
  }
  if (actual > expected) {
    throw FE(FE::Kind::BadHeader, "dataset has " + std::to_string(actual - expected) + " trailing bytes");
  }
}

}  // namespace

WeatherState Dataset::state(std::span<const std::size_t> times, std::span<const std::size_t> channels) const {
  std::vector<VariableEntry> entries;
  for (std::size_t c : channels) entries.push_back(catalog[c]);
  WeatherState s;
  s.catalog = VariableCatalog(std::move(entries));
  s.data = Tensor4<float>(times.size(), channels.size(), grid.n_lat, grid.n_lon);
  const auto stamps = timestamps();
  for (std::size_t b = 0; b < times.size(); ++b) {
    if (times[b] >= n_times()) throw FE(FE::Kind::OutOfRange, "timestep out of range");
    s.timestamps.push_back(stamps[times[b]]);
    for (std::size_t k = 0; k < channels.size(); ++k) {
      auto src = data.plane(times[b], channels[k]);
      std::copy(src.begin(), src.end(), s.data.plane(b, k).begin());
    }
  }
  return s;
}

std::uint64_t write_dataset(const Dataset& ds, std::ostream& os) {
  ds.grid.validate();
  if (ds.data.channels() != ds.catalog.size() || ds.data.height() != ds.grid.n_lat ||
      ds.data.width() != ds.grid.n_lon) {
    throw UsageError("dataset payload shape does not match grid/catalog");
  }
  if (ds.mask && (ds.mask->n_lat() != ds.grid.n_lat || ds.mask->n_lon() != ds.grid.n_lon)) {
    throw UsageError("mask shape does not match grid");
  }
  io::HashingWriter w(os);
  const std::string header = header_json(ds).dump();
  w.bytes(kDatasetMagic, 4);
  w.value<std::uint64_t>(header.size());
  w.bytes(header.data(), header.size());
  w.array<float>(ds.data.data());
  if (ds.mask) w.bytes(ds.mask->cells().data(), ds.mask->cells().size());
  const std::uint64_t digest = w.digest();
  w.trailer();
  return digest;
}

std::uint64_t write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  const auto digest = write_dataset(ds, os);
  os.flush();
  if (!os) throw Error("failed writing " + path);
  return digest;
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  // Discards the bytes; only the running digest matters.
  struct NullBuf : std::streambuf {
    int_type overflow(int_type c) override { return traits_type::not_eof(c); }
    std::streamsize xsputn(const char*, std::streamsize n) override { return n; }
  } buf;
  std::ostream os(&buf);
  return write_dataset(ds, os);
}

Dataset read_dataset(const std::string& path) {
  const auto buf = io::slurp(path);
  check_magic(buf);
  io::Reader r(buf);
  r.take(4, "magic");
  const auto header_len = r.value<std::uint64_t>("header length");
  if (header_len > r.remaining()) throw FE(FE::Kind::Truncated, "dataset truncated inside header");
  auto parsed = parse_header(r.take(header_len, "header"));
  check_size(buf.size(), expected_size(header_len, parsed));

  const std::uint64_t body = buf.size() - 8;
  Fnv1a64 h;
  h.update(std::span<const std::byte>(buf.data(), body));
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, 8);
  if (io::to_little(stored) != h.digest()) throw FE(FE::Kind::ChecksumMismatch, "dataset checksum mismatch");

  Dataset ds = std::move(parsed.meta);
  ds.data = Tensor4<float>(parsed.n_times, ds.catalog.size(), ds.grid.n_lat, ds.grid.n_lon);
  r.array<float>(std::span<float>(ds.data.data()), "payload");
  if (parsed.has_mask) {
    auto m = r.take(ds.grid.cells(), "mask");
    std::vector<std::uint8_t> cells(m.size());
    std::memcpy(cells.data(), m.data(), m.size());
    try {
      ds.mask = LandSeaMask(ds.grid.n_lat, ds.grid.n_lon, std::move(cells));
    } catch (const UsageError& e) {
      throw FE(FE::Kind::BadHeader, e.what());
    }
  }
  return ds;
}

DatasetReader::DatasetReader(const std::string& path, bool verify_checksum)
    : in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open " + path);
  in_.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);

  std::array<std::byte, 12> pre{};
  in_.read(reinterpret_cast<char*>(pre.data()), static_cast<std::streamsize>(std::min<std::uint64_t>(12, file_size)));
  check_magic(std::span<const std::byte>(pre.data(), std::min<std::uint64_t>(12, file_size)));
  if (file_size < 12) throw FE(FE::Kind::Truncated, "dataset truncated before header");
  std::uint64_t header_len;
  std::memcpy(&header_len, pre.data() + 4, 8);
  header_len = io::to_little(header_len);
  if (12 + header_len > file_size) throw FE(FE::Kind::Truncated, "dataset truncated inside header");
  std::vector<std::byte> hbytes(header_len);
  in_.read(reinterpret_cast<char*>(hbytes.data()), static_cast<std::streamsize>(header_len));
  auto parsed = parse_header(hbytes);
  check_size(file_size, expected_size(header_len, parsed));
  const std::uint64_t mask_offset = 12 + header_len + payload_bytes(parsed);
  const bool has_mask = parsed.has_mask;
  header_ = std::move(parsed.meta);
  n_times_ = parsed.n_times;
  payload_offset_ = 12 + header_len;

  const std::uint64_t body = file_size - 8;
  if (verify_checksum) {
    in_.seekg(0);
    Fnv1a64 h;
    std::vector<char> chunk(1 << 20);
    std::uint64_t left = body;
    while (left > 0) {
      const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(left, chunk.size()));
      in_.read(chunk.data(), static_cast<std::streamsize>(n));
      if (!in_) throw FE(FE::Kind::Truncated, "short read while verifying checksum");
      h.update(chunk.data(), n);
      left -= n;
    }
    checksum_ = h.digest();
  }
  in_.seekg(static_cast<std::streamoff>(body));
  std::uint64_t stored;
  in_.read(reinterpret_cast<char*>(&stored), 8);
  stored = io::to_little(stored);
  if (verify_checksum && stored != checksum_) throw FE(FE::Kind::ChecksumMismatch, "dataset checksum mismatch");
  checksum_ = stored;

  if (has_mask) {
    std::vector<std::uint8_t> cells(header_.grid.cells());
    in_.seekg(static_cast<std::streamoff>(mask_offset));
    in_.read(reinterpret_cast<char*>(cells.data()), static_cast<std::streamsize>(cells.size()));
    try {
      header_.mask = LandSeaMask(header_.grid.n_lat, header_.grid.n_lon, std::move(cells));
    } catch (const UsageError& e) {
      throw FE(FE::Kind::BadHeader, e.what());
    }
  }
}

WeatherState DatasetReader::read_timestep(std::size_t t) {
  if (t >= n_times_) {
    throw FE(FE::Kind::OutOfRange,
             "timestep " + std::to_string(t) + " out of range (n_times = " + std::to_string(n_times_) + ")");
  }
  const std::size_t C = header_.catalog.size();
  const std::size_t cells = header_.grid.cells();
  WeatherState s;
  s.catalog = header_.catalog;
  s.data = Tensor4<float>(1, C, header_.grid.n_lat, header_.grid.n_lon);
  s.timestamps = {header_.start + std::chrono::hours{static_cast<long>(t) * header_.step_hours}};
  in_.seekg(static_cast<std::streamoff>(payload_offset_ + t * C * cells * sizeof(float)));
  std::vector<std::byte> raw(C * cells * sizeof(float));
  in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in_) throw FE(FE::Kind::Truncated, "short read for timestep " + std::to_string(t));
  io::Reader r(raw);
  r.array<float>(std::span<float>(s.data.data()), "timestep");
  return s;
}

std::uint64_t dataset_checksum(const std::string& path) { return DatasetReader(path, false).checksum(); }

}  // namespace wxe
