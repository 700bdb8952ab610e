#include "noisyq/harness/checkpoint.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "noisyq/harness/csv.hpp"
#include "noisyq/rng.hpp"

namespace noisyq::harness {

namespace {
constexpr const char* kMagic = "noisyq-checkpoint v1";

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("checkpoint " + path.string() + ": " + why);
}

double parse_double(const std::string& tok, const std::filesystem::path& path) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') fail(path, "bad number '" + tok + "'");
  return v;
}
}  // namespace

void checkpoint_save(const nets::QNetwork& net, std::int64_t step, std::uint64_t seed,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << kMagic << "\n";
  out << "kind " << nets::kind_name(net.kind()) << "\n";
  out << "arch";
  for (std::size_t w : net.arch().widths()) out << ' ' << w;
  out << "\n";
  out << "seed " << seed << "\n";
  out << "step " << step << "\n";
  for (const auto& [name, tensor] : net.named_parameters()) {
    out << "tensor " << name;
    for (std::size_t d : tensor->shape()) out << ' ' << d;
    out << "\n";
    std::size_t per_line = tensor->ndim() == 2 ? tensor->cols() : tensor->numel();
    for (std::size_t i = 0; i < tensor->numel(); ++i) {
      out << fmt_double((*tensor)[i]);
      out << ((i + 1) % per_line == 0 ? '\n' : ' ');
    }
  }
  out << "end\n";
  atomic_write_text(path, out.str());
}

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kMagic) fail(path, "bad or missing header");

  auto expect_kv = [&](const std::string& key) -> std::string {
    if (!std::getline(in, line)) fail(path, "truncated header");
    if (line.rfind(key + " ", 0) != 0) fail(path, "expected '" + key + "' line");
    return line.substr(key.size() + 1);
  };

  nets::Arch arch;
  arch.kind = nets::kind_from_name(expect_kv("kind"));
  {
    std::istringstream ws(expect_kv("arch"));
    std::vector<std::size_t> widths;
    std::size_t w;
    while (ws >> w) widths.push_back(w);
    if (widths.size() < 2) fail(path, "arch needs at least input and output widths");
    arch.input = widths.front();
    arch.output = widths.back();
    arch.hidden.assign(widths.begin() + 1, widths.end() - 1);
  }
  LoadedCheckpoint result;
  result.seed = std::strtoull(expect_kv("seed").c_str(), nullptr, 10);
  result.step = std::strtoll(expect_kv("step").c_str(), nullptr, 10);

  Rng zero(0);
  result.net = nets::QNetwork::init(arch, zero);

  for (auto& [name, tensor] : result.net.named_parameters()) {
    if (!std::getline(in, line)) fail(path, "truncated before tensor " + name);
    std::istringstream hs(line);
    std::string word, got_name;
    hs >> word >> got_name;
    if (word != "tensor" || got_name != name) {
      fail(path, "expected tensor " + name + ", got '" + line + "'");
    }
    std::vector<std::size_t> dims;
    std::size_t d;
    while (hs >> d) dims.push_back(d);
    if (dims != tensor->shape()) fail(path, "shape mismatch for tensor " + name);

    std::size_t filled = 0;
    while (filled < tensor->numel()) {
      if (!std::getline(in, line)) fail(path, "truncated inside tensor " + name);
      std::istringstream vs(line);
      std::string tok;
      while (vs >> tok) {
        if (filled >= tensor->numel()) fail(path, "too many values in tensor " + name);
        (*tensor)[filled++] = parse_double(tok, path);
      }
    }
  }
  if (!std::getline(in, line) || line != "end") fail(path, "missing end marker");
  return result;
}

LoadedCheckpoint checkpoint_load_expect(const std::filesystem::path& path,
                                        const nets::Arch& expected) {
  LoadedCheckpoint loaded = checkpoint_load(path);
  if (!(loaded.net.arch() == expected)) {
    fail(path, "architecture mismatch: file holds a " + nets::kind_name(loaded.net.kind()) +
                   " network of different layout");
  }
  return loaded;
}

}  // namespace noisyq::harness
