#include "udi/access/directory.hpp"

#include <fstream>

#include "udi/access/crypto.hpp"
#include "udi/error.hpp"

namespace udi::access {

const Credential& CredentialDirectory::enroll(Credential c, std::string_view secret) {
  if (c.salt.empty()) c.salt = sha256_hex("salt:" + c.subject_id).substr(0, 32);
  c.secret_hash = hash_secret(secret, c.salt);
  const std::string id = c.subject_id;
  add(std::move(c));
  return by_subject_.find(id)->second;
}

void CredentialDirectory::add(Credential c) {
  if (c.subject_id.empty()) fail(ErrorCode::InvalidInput, "credential without subject id");
  if (by_subject_.contains(c.subject_id)) fail(ErrorCode::InvalidInput, "subject '" + c.subject_id + "' already enrolled");
  by_subject_.emplace(c.subject_id, std::move(c));
}

const Credential* CredentialDirectory::find(std::string_view subject_id) const {
  const auto it = by_subject_.find(subject_id);
  return it == by_subject_.end() ? nullptr : &it->second;
}

const Credential* CredentialDirectory::find_patient(std::string_view patient_id) const {
  for (const auto& [_, c] : by_subject_) {
    if (c.role == Role::user && c.scope == patient_id) return &c;
  }
  return nullptr;
}

std::vector<Credential> CredentialDirectory::all() const {
  std::vector<Credential> out;
  for (const auto& [_, c] : by_subject_) out.push_back(c);
  return out;
}

std::vector<std::string> CredentialDirectory::direct_identifiers() const {
  std::vector<std::string> out;
  for (const auto& [_, c] : by_subject_) {
    for (const std::string* s : {&c.subject_id, &c.display_name, &c.birthdate, &c.address, &c.credential_id}) {
      if (!s->empty()) out.push_back(*s);
    }
    if (c.role == Role::user && !c.scope.empty()) out.push_back(c.scope);
  }
  return out;
}

nlohmann::json CredentialDirectory::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [_, c] : by_subject_) {
    arr.push_back({{"subject_id", c.subject_id},
                   {"role", to_string(c.role)},
                   {"salt", c.salt},
                   {"secret_hash", c.secret_hash},
                   {"display_name", c.display_name},
                   {"scope", c.scope},
                   {"birthdate", c.birthdate},
                   {"address", c.address},
                   {"credential_id", c.credential_id}});
  }
  return {{"subjects", arr}};
}

CredentialDirectory CredentialDirectory::from_json(const nlohmann::json& j) {
  CredentialDirectory dir;
  try {
    for (const auto& e : j.at("subjects")) {
      Credential c;
      c.subject_id = e.at("subject_id").get<std::string>();
      c.role = role_from_string(e.at("role").get<std::string>());
      c.display_name = e.value("display_name", "");
      c.scope = e.value("scope", "");
      c.birthdate = e.value("birthdate", "");
      c.address = e.value("address", "");
      c.credential_id = e.value("credential_id", "");
      c.salt = e.value("salt", "");
      if (e.contains("secret")) {
        dir.enroll(std::move(c), e.at("secret").get<std::string>());
      } else {
        c.secret_hash = e.at("secret_hash").get<std::string>();
        dir.add(std::move(c));
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::InvalidInput, std::string("malformed credential directory: ") + ex.what());
  }
  return dir;
}

CredentialDirectory CredentialDirectory::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open credential directory " + file.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::InvalidInput, std::string("credential directory is not JSON: ") + ex.what());
  }
}

}  // namespace udi::access
