#pragma once

// Validator for the JSON-Schema subset used by schema/*.schema.json:
// type, const, required, properties, additionalProperties=false, items,
// minItems, maxItems, minimum, maximum and local "#/$defs/..." refs.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace isokit::testing {

class SchemaChecker {
public:
    explicit SchemaChecker(nlohmann::json schema) : root_(std::move(schema)) {}

    static SchemaChecker from_file(const std::string& path) {
        std::ifstream in(path);
        return SchemaChecker(nlohmann::json::parse(in));
    }

    std::vector<std::string> validate(const nlohmann::json& doc) const {
        std::vector<std::string> errors;
        check(root_, doc, "$", errors);
        return errors;
    }

private:
    const nlohmann::json& resolve(const nlohmann::json& schema) const {
        if (schema.contains("$ref")) {
            const std::string ref = schema["$ref"];
            const std::string prefix = "#/$defs/";
            if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
            return root_.at("$defs").at(ref.substr(prefix.size()));
        }
        return schema;
    }

    static bool type_matches(const std::string& type, const nlohmann::json& v) {
        if (type == "object") return v.is_object();
        if (type == "array") return v.is_array();
        if (type == "string") return v.is_string();
        if (type == "boolean") return v.is_boolean();
        if (type == "integer") return v.is_number_integer();
        if (type == "number") return v.is_number();
        if (type == "null") return v.is_null();
        return false;
    }

    void check(const nlohmann::json& raw_schema, const nlohmann::json& v, const std::string& path,
               std::vector<std::string>& errors) const {
        const nlohmann::json& s = resolve(raw_schema);
        if (s.contains("type") && !type_matches(s["type"], v)) {
            errors.push_back(path + ": expected " + s["type"].get<std::string>());
            return;
        }
        if (s.contains("const") && s["const"] != v) errors.push_back(path + ": const mismatch");
        if (v.is_number()) {
            const double x = v.get<double>();
            if (s.contains("minimum") && x < s["minimum"].get<double>()) errors.push_back(path + ": below minimum");
            if (s.contains("maximum") && x > s["maximum"].get<double>()) errors.push_back(path + ": above maximum");
        }
        if (v.is_object()) {
            if (s.contains("required")) {
                for (const auto& key : s["required"]) {
                    if (!v.contains(key.get<std::string>())) errors.push_back(path + ": missing " + key.get<std::string>());
                }
            }
            const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (s.contains("properties") && s["properties"].contains(it.key())) {
                    check(s["properties"][it.key()], it.value(), path + "." + it.key(), errors);
                } else if (closed) {
                    errors.push_back(path + ": unexpected property " + it.key());
                }
            }
        }
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(path + ": too few items");
            if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errors.push_back(path + ": too many items");
            if (s.contains("items")) {
                for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]", errors);
            }
        }
    }

    nlohmann::json root_;
};

}  // namespace isokit::testing
