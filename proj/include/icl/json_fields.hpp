#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"

namespace icl::jf {

// Checked field access that reports failures as ValidationError with a dotted path.

std::string join(const std::string& path, const std::string& key);
std::string index(const std::string& path, std::size_t i);

const nlohmann::json& object(const nlohmann::json& j, const std::string& path);
const nlohmann::json& array(const nlohmann::json& j, const std::string& path);
const nlohmann::json& field(const nlohmann::json& obj, const std::string& key, const std::string& path);
bool has(const nlohmann::json& obj, const std::string& key);

double number(const nlohmann::json& j, const std::string& path);
double positive(const nlohmann::json& j, const std::string& path);
std::int64_t integer(const nlohmann::json& j, const std::string& path);
std::uint64_t unsigned_integer(const nlohmann::json& j, const std::string& path);
std::size_t count(const nlohmann::json& j, const std::string& path, std::size_t min = 0);
bool boolean(const nlohmann::json& j, const std::string& path);
std::string string(const nlohmann::json& j, const std::string& path);
std::vector<double> numbers(const nlohmann::json& j, const std::string& path);

// Rejects keys outside `allowed`, so typos surface instead of being ignored.
void only_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
               const std::string& path);

}  // namespace icl::jf
