#include "morphome/pipeline/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

namespace morphome::pipeline {

namespace fs = std::filesystem;

namespace {

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), data, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw std::runtime_error("sha256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }
};

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json digests_json(const std::vector<FileDigest>& files) {
  Json out = Json::array();
  for (const auto& f : files) out.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return out;
}

std::vector<FileDigest> digests_from(const Json& j) {
  std::vector<FileDigest> out;
  for (const auto& f : j) out.push_back({f.at("path"), f.at("sha256"), f.at("bytes")});
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  DigestContext d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

Json to_json(const StageManifest& m) {
  Json j;
  j["stage"] = m.stage;
  j["key"] = m.key;
  j["version"] = m.version;
  j["started_utc"] = m.started_utc;
  j["wall_seconds"] = m.wall_seconds;
  j["fingerprint"] = m.fingerprint;
  j["seeds"] = m.seeds;
  j["inputs"] = digests_json(m.inputs);
  j["outputs"] = digests_json(m.outputs);
  j["config"] = m.config;
  return j;
}

StageManifest manifest_from_json(const Json& j) {
  StageManifest m;
  m.stage = j.at("stage");
  m.key = j.at("key");
  m.version = j.at("version");
  m.started_utc = j.at("started_utc");
  m.wall_seconds = j.at("wall_seconds");
  m.fingerprint = j.at("fingerprint");
  m.seeds = j.at("seeds");
  m.inputs = digests_from(j.at("inputs"));
  m.outputs = digests_from(j.at("outputs"));
  m.config = j.at("config");
  return m;
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path& path, const StageManifest& m) { write_text_atomic(path, to_json(m).dump(2) + "\n"); }

std::optional<StageManifest> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return manifest_from_json(Json::parse(in));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: rerun the stage
  }
}

std::string Context::relative(const fs::path& p) const { return fs::relative(p, root()).generic_string(); }

StageOutcome run_stage(const Context& ctx, const StageSpec& spec) {
  std::vector<FileDigest> inputs;
  for (const auto& p : spec.inputs) {
    if (!fs::exists(p)) {
      std::string msg = spec.stage + (spec.key.empty() ? "" : " " + spec.key) + ": missing input " + p.string();
      if (!spec.upstream_hint.empty()) msg += "; run the '" + spec.upstream_hint + "' stage first";
      throw UserError(msg);
    }
    inputs.push_back({ctx.relative(p), sha256_file(p), fs::file_size(p)});
  }
  Json fp = {{"stage", spec.stage}, {"key", spec.key}, {"config", spec.fingerprint_config}, {"seeds", spec.seeds}};
  std::string fingerprint = sha256_hex(fp.dump());

  if (!ctx.force) {
    if (auto old = read_manifest(spec.manifest); old && old->fingerprint == fingerprint) {
      bool same = old->inputs.size() == inputs.size();
      for (std::size_t i = 0; same && i < inputs.size(); ++i)
        same = old->inputs[i].path == inputs[i].path && old->inputs[i].sha256 == inputs[i].sha256;
      for (const auto& out : old->outputs) {
        if (!same) break;
        fs::path p = ctx.root() / out.path;
        same = fs::exists(p) && fs::file_size(p) == out.bytes && sha256_file(p) == out.sha256;
      }
      if (same) {
        ctx.info(spec.stage + (spec.key.empty() ? "" : " " + spec.key) + ": up to date, skipped");
        return StageOutcome::kSkipped;
      }
    }
  }

  ctx.info(spec.stage + (spec.key.empty() ? "" : " " + spec.key) + ": running");
  StageManifest m;
  m.stage = spec.stage;
  m.key = spec.key;
  m.fingerprint = fingerprint;
  m.config = ctx.config.resolved;
  m.seeds = spec.seeds;
  m.inputs = std::move(inputs);
  m.started_utc = utc_now();
  auto start = std::chrono::steady_clock::now();
  fs::remove(spec.manifest);
  auto outputs = spec.run();
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& p : outputs) m.outputs.push_back({ctx.relative(p), sha256_file(p), fs::file_size(p)});
  write_manifest(spec.manifest, m);
  return StageOutcome::kRan;
}

}  // namespace morphome::pipeline
