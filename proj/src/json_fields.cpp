#include "icl/json_fields.hpp"

#include <cmath>
#include <limits>

#include "icl/errors.hpp"

namespace icl::jf {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

const json& object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ValidationError(path, "expected an object");
    return j;
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ValidationError(path, "expected an array");
    return j;
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
    object(obj, path);
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(join(path, key), "missing required field");
    return *it;
}

bool has(const json& obj, const std::string& key) {
    return obj.is_object() && obj.contains(key);
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError(path, "must be finite");
    return v;
}

double positive(const json& j, const std::string& path) {
    const double v = number(j, path);
    if (!(v > 0.0)) throw ValidationError(path, "must be positive");
    return v;
}

std::int64_t integer(const json& j, const std::string& path) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    throw ValidationError(path, "expected an integer");
}

std::uint64_t unsigned_integer(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        // Documents built in memory from signed values never parse as unsigned.
        const auto v = j.get<std::int64_t>();
        if (v < 0) throw ValidationError(path, "must be non-negative");
        return static_cast<std::uint64_t>(v);
    }
    throw ValidationError(path, "expected a non-negative integer");
}

std::size_t count(const json& j, const std::string& path, std::size_t min) {
    const std::uint64_t v = unsigned_integer(j, path);
    if (v < min) throw ValidationError(path, "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ValidationError(path, "expected true or false");
    return j.get<bool>();
}

std::string string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ValidationError(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    array(j, path);
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], index(path, i)));
    return out;
}

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    object(obj, path);
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ValidationError(join(path, key), "unknown field");
    }
}

}  // namespace icl::jf
