#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/model.hpp"

namespace udi::access {

/// A registered person. The secret is never stored, only its salted hash.
struct Credential {
  std::string subject_id;
  Role role = Role::user;
  std::string salt;
  std::string secret_hash;
  std::string display_name;
  /// Patient id for users, manufacturer for producers, empty otherwise.
  std::string scope;
  std::string birthdate;  // ISO date, patients only
  std::string address;
  std::string credential_id;  // health card or badge number
};

class CredentialDirectory {
 public:
  /// Hashes `secret` with a salt derived from the subject id.
  /// Throws InvalidInput on a duplicate subject.
  const Credential& enroll(Credential c, std::string_view secret);
  /// Adds a credential with a precomputed hash.
  void add(Credential c);

  const Credential* find(std::string_view subject_id) const;
  /// The user credential whose scope is this patient, if any.
  const Credential* find_patient(std::string_view patient_id) const;
  std::vector<Credential> all() const;

  /// Every directly identifying string: names, subject ids, birthdates,
  /// addresses, credential ids and patient ids.
  std::vector<std::string> direct_identifiers() const;

  nlohmann::json to_json() const;
  /// Accepts either hashed entries or plaintext `secret` entries. Throws InvalidInput.
  static CredentialDirectory from_json(const nlohmann::json& j);
  static CredentialDirectory load(const std::filesystem::path& file);

 private:
  std::map<std::string, Credential, std::less<>> by_subject_;
};

}  // namespace udi::access
