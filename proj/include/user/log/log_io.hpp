#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "user/log/types.hpp"

namespace user {

using OrderedJson = nlohmann::ordered_json;

/// Reads a JSON Lines behavior log. Events come back grouped by user (in
/// order of first appearance) and sorted by timestamp within each user;
/// equal timestamps keep file order. Blank lines are ignored.
std::vector<Behavior> parse_log(const std::filesystem::path& path);
std::vector<Behavior> parse_log(std::istream& in);

/// Parses one log line; throws ParseError tagged with `line_no`.
Behavior parse_behavior(const std::string& line, std::size_t line_no);

OrderedJson behavior_to_json(const Behavior& b, bool include_user = true);
Behavior behavior_from_json(const nlohmann::json& j, const std::string& user, std::size_t line_no);

/// Canonical compact serialization, one event per line.
void write_log(std::ostream& out, const std::vector<Behavior>& events);
void write_log(const std::filesystem::path& path, const std::vector<Behavior>& events);

/// Corpus file: JSON Lines of {"id","title","topic"?,"popularity"}.
std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Prepared impressions: JSON Lines with task, query, candidates, labels,
/// features and a compact history (search behaviors keep clicked results only).
OrderedJson impression_to_json(const Impression& imp);
Impression impression_from_json(const nlohmann::json& j, std::size_t line_no);
std::vector<Impression> read_impressions(const std::filesystem::path& path);
void write_impressions(const std::filesystem::path& path, const std::vector<Impression>& imps);

/// Groups a flat event list by user, preserving order.
std::vector<std::vector<Behavior>> group_by_user(const std::vector<Behavior>& events);

}  // namespace user
