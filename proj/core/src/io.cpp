#include "cmdsim/io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmdsim/error.hpp"

namespace cmdsim::io {
namespace {

using nlohmann::json;

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void put(const json& j) { out_ << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n'; }
  ~Writer() { out_.flush(); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void put_command_fields(json& j, const CommandLine& c) {
  j["text"] = c.text;
  j["source"] = std::string(to_string(c.source));
  if (c.provenance) j["provenance"] = *c.provenance;
}

CommandLine command_from(const json& j, Source fallback) {
  CommandLine c;
  c.text = j.at("text").get<std::string>();
  c.source = j.contains("source") ? source_from_string(j.at("source").get<std::string>()) : fallback;
  if (j.contains("provenance")) c.provenance = j.at("provenance").get<std::string>();
  return c;
}

}  // namespace

std::vector<CommandLinePair> read_pairs(const std::filesystem::path& path) {
  std::vector<CommandLinePair> out;
  for_each_record(path, [&](const json& j) {
    CommandLinePair p;
    p.anchor.text = j.at("anchor").get<std::string>();
    p.positive.text = j.at("positive").get<std::string>();
    p.positive.source = Source::pair_generated;
    p.pair_id = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(p));
  });
  return out;
}

void write_pairs(const std::filesystem::path& path, const std::vector<CommandLinePair>& pairs) {
  Writer w(path);
  for (const auto& p : pairs) w.put(json{{"anchor", p.anchor.text}, {"positive", p.positive.text}});
}

std::vector<CommandLine> read_commands(const std::filesystem::path& path, Source fallback) {
  std::vector<CommandLine> out;
  for_each_record(path, [&](const json& j) { out.push_back(command_from(j, fallback)); });
  return out;
}

void write_commands(const std::filesystem::path& path, const std::vector<CommandLine>& cmds) {
  Writer w(path);
  for (const auto& c : cmds) {
    json j;
    put_command_fields(j, c);
    w.put(j);
  }
}

std::vector<ExplanationRecord> read_explanations(const std::filesystem::path& path) {
  std::vector<ExplanationRecord> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({command_from(j, Source::real_world), j.at("explanation").get<std::string>()});
  });
  return out;
}

void write_explanations(const std::filesystem::path& path, const std::vector<ExplanationRecord>& records) {
  Writer w(path);
  for (const auto& r : records) {
    json j;
    put_command_fields(j, r.command);
    j["explanation"] = r.explanation;
    w.put(j);
  }
}

std::vector<NegativesRecord> read_negatives(const std::filesystem::path& path) {
  std::vector<NegativesRecord> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({j.at("query_id").get<std::size_t>(), j.at("negative_ids").get<std::vector<std::size_t>>()});
  });
  return out;
}

void write_negatives(const std::filesystem::path& path, const std::vector<NegativesRecord>& records) {
  Writer w(path);
  for (const auto& r : records) w.put(json{{"query_id", r.query_id}, {"negative_ids", r.negative_ids}});
}

std::vector<TestsetRecord> read_testset(const std::filesystem::path& path) {
  std::vector<TestsetRecord> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({j.at("query").get<std::string>(), j.at("positive").get<std::string>(),
                   j.at("negative_ids").get<std::vector<std::size_t>>()});
  });
  return out;
}

void write_testset(const std::filesystem::path& path, const std::vector<TestsetRecord>& records) {
  Writer w(path);
  for (const auto& r : records) {
    w.put(json{{"query", r.query}, {"positive", r.positive}, {"negative_ids", r.negative_ids}});
  }
}

std::vector<TechniqueRecord> read_technique_records(const std::filesystem::path& path) {
  std::vector<TechniqueRecord> out;
  for_each_record(path, [&](const json& j) {
    const auto& id = j.at("technique_id");
    out.push_back({id.is_string() ? id.get<std::string>() : id.dump(), j.at("command").get<std::string>()});
  });
  return out;
}

void write_technique_records(const std::filesystem::path& path, const std::vector<TechniqueRecord>& records) {
  Writer w(path);
  for (const auto& r : records) w.put(json{{"technique_id", r.technique_id}, {"command", r.command}});
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingRecord> out;
  for_each_record(path, [&](const json& j) {
    out.push_back({j.at("text").get<std::string>(), j.at("vector").get<std::vector<double>>()});
  });
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  Writer w(path);
  for (const auto& r : records) w.put(json{{"text", r.text}, {"vector", r.vector}});
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
}

}  // namespace cmdsim::io
