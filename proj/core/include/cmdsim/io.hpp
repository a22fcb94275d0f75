#pragma once

// JSON Lines readers and writers for every dataset file the toolkit exchanges.
// All files are UTF-8 with LF line endings, one JSON object per line.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cmdsim/command.hpp"

namespace cmdsim::io {

// {"anchor": string, "positive": string}
std::vector<CommandLinePair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<CommandLinePair>& pairs);

// {"text": string, "source": string, "provenance"?: string}
// A missing source defaults to `fallback`.
std::vector<CommandLine> read_commands(const std::filesystem::path& path,
                                       Source fallback = Source::real_world);
void write_commands(const std::filesystem::path& path, const std::vector<CommandLine>& cmds);

struct ExplanationRecord {
  CommandLine command;
  std::string explanation;
};

// {"text": string, "explanation": string, "source"?: string, "provenance"?: string}
std::vector<ExplanationRecord> read_explanations(const std::filesystem::path& path);
void write_explanations(const std::filesystem::path& path,
                        const std::vector<ExplanationRecord>& records);

struct NegativesRecord {
  std::size_t query_id = 0;
  std::vector<std::size_t> negative_ids;
};

// {"query_id": int, "negative_ids": [int]}
std::vector<NegativesRecord> read_negatives(const std::filesystem::path& path);
void write_negatives(const std::filesystem::path& path, const std::vector<NegativesRecord>& records);

struct TestsetRecord {
  std::string query;
  std::string positive;
  std::vector<std::size_t> negative_ids;  // indices into the corpus file
};

// {"query": string, "positive": string, "negative_ids": [int]}
std::vector<TestsetRecord> read_testset(const std::filesystem::path& path);
void write_testset(const std::filesystem::path& path, const std::vector<TestsetRecord>& records);

struct TechniqueRecord {
  std::string technique_id;
  std::string command;
};

// {"technique_id": string, "command": string}, file order preserved.
std::vector<TechniqueRecord> read_technique_records(const std::filesystem::path& path);
void write_technique_records(const std::filesystem::path& path,
                             const std::vector<TechniqueRecord>& records);

struct EmbeddingRecord {
  std::string text;
  std::vector<double> vector;
};

// {"text": string, "vector": [real]}
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

// Plain text, one entry per non-empty line; '#' starts a comment line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace cmdsim::io
