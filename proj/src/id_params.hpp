#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace adalab::detail {

/// "family:k1=v1,k2=v2" ids used for problems and oracles.
class IdParams {
 public:
  explicit IdParams(const std::string& id) : id_(id) {
    const auto colon = id.find(':');
    family_ = id.substr(0, colon);
    if (colon == std::string::npos) return;
    std::stringstream ss(id.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("bad parameter '" + item + "' in " + id);
      params_[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }

  const std::string& family() const { return family_; }

  double number(const std::string& key, double fallback) {
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it->second.size())
      throw std::invalid_argument("bad number for '" + key + "' in " + id_);
    params_.erase(it);
    return v;
  }

  void finish() const {
    if (!params_.empty())
      throw std::invalid_argument("unknown parameter '" + params_.begin()->first + "' in " + id_);
  }

 private:
  std::string id_;
  std::string family_;
  std::map<std::string, std::string> params_;
};

}  // namespace adalab::detail
