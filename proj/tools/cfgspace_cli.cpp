// Batch front-end: run a verification suite from an experiment spec and write
// report.json plus CSV trajectories, or list the available suites.
//
// Exit codes: 0 all asserted checks pass, 1 an asserted check failed,
// 2 usage or schema error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "cfgspace/suites.hpp"
#include "json_locator.hpp"

namespace {

namespace fs = std::filesystem;
using cfgspace::io::json;
namespace suites = cfgspace::suites;

constexpr int kExitFail = 1;
constexpr int kExitSchema = 2;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream os;
  os << in.rdbuf();
  out = os.str();
  return true;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

int run(const std::string& spec_path, const std::string& out_dir, std::size_t shards,
        std::optional<std::uint64_t> seed_override) {
  std::string text;
  if (!read_file(spec_path, text)) {
    std::cerr << spec_path << ": cannot read spec file\n";
    return kExitSchema;
  }
  json spec;
  try {
    spec = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    std::cerr << spec_path << ":" << line << ": invalid JSON: " << e.what() << "\n";
    return kExitSchema;
  }
  suites::RunOptions opt;
  opt.shards = shards;
  opt.seed_override = seed_override;
  suites::SuiteOutput out;
  try {
    out = suites::run_suite(spec, opt);
  } catch (const cfgspace::io::schema_error& e) {
    const cfgspace::tools::JsonLocator loc(text);
    const std::string where = e.pointer().empty() ? "/" : e.pointer();
    std::cerr << spec_path << ":" << loc.line_of(e.pointer()) << ": schema error at " << where << ": " << e.what()
              << "\n";
    return kExitSchema;
  }
  const auto report = suites::report_json(spec, out, sha256_hex(text), shards);
  try {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
    for (const auto& [name, contents] : out.files) write_file(fs::path(out_dir) / name, contents);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  }
  std::size_t soft_fail = 0;
  for (const auto& c : out.checks) {
    if (c.verdict != "FAIL") continue;
    if (c.asserted) std::cerr << "FAILED " << c.check << " [" << c.witness << "]\n";
    else ++soft_fail;
  }
  const bool ok = report["status"] == "PASS";
  std::cout << report["suite"].get<std::string>() << ": " << (ok ? "PASS" : "FAIL") << " (" << out.checks.size()
            << " checks, " << report["failed"].size() << " failed, " << soft_fail << " soft warnings) -> "
            << (fs::path(out_dir) / "report.json").string() << "\n";
  return ok ? 0 : kExitFail;
}

int list_suites(const std::string& name, bool as_json) {
  if (!name.empty() && !suites::known_suite(name)) {
    std::cerr << "unknown suite '" << name << "'; did you mean '" << suites::nearest_suite(name) << "'?\n";
    return kExitSchema;
  }
  const auto doc = suites::catalog_json();
  if (as_json) {
    if (name.empty()) {
      std::cout << doc.dump(2) << "\n";
    } else {
      for (const auto& s : doc["suites"])
        if (s["name"] == name) std::cout << s.dump(2) << "\n";
    }
    return 0;
  }
  for (const auto& s : suites::suite_catalog()) {
    if (!name.empty() && s.name != name) continue;
    std::cout << s.name << "\n  " << s.summary << "\n  spaces:";
    for (const auto& sp : s.spaces) std::cout << " " << sp;
    std::cout << "\n";
    for (const auto& f : s.fields) std::cout << "    " << std::left << std::setw(26) << f.name << f.doc << "\n";
  }
  if (name.empty()) std::cout << "\nspec schema: " << suites::kSpecSchema << " (use --json for the full document)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfgspace verification suites"};
  app.require_subcommand(1);
  app.set_version_flag("--version", suites::kLibraryVersion);

  auto* run_cmd = app.add_subcommand("run", "run the suite described by a spec file");
  std::string spec_path, out_dir;
  std::size_t shards = 1;
  std::optional<std::uint64_t> seed_override;
  run_cmd->add_option("spec", spec_path, "experiment spec (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  run_cmd->add_option("--shards", shards, "parallel Monte Carlo shards")->check(CLI::Range(1, 1024));
  run_cmd->add_option("--seed-override", seed_override, "replace the spec seed");

  auto* list_cmd = app.add_subcommand("list-suites", "describe the available suites");
  std::string suite_name;
  bool as_json = false;
  list_cmd->add_option("suite", suite_name, "show a single suite");
  list_cmd->add_flag("--json", as_json, "emit the schema as a JSON document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }
  if (run_cmd->parsed()) return run(spec_path, out_dir, shards, seed_override);
  return list_suites(suite_name, as_json);
}
