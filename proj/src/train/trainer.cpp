#include "user/train/trainer.hpp"

namespace user {

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["split"] = "val";
  j["task"] = phase;
  j["loss"] = loss;
  j["loss_search"] = loss_search;
  j["loss_recommend"] = loss_recommend;
  j["groups_search"] = groups_search;
  j["groups_recommend"] = groups_recommend;
  if (val_map >= 0) j["map"] = val_map;
  if (val_auc >= 0) j["auc"] = val_auc;
  j["selection"] = selection;
  j["seconds"] = seconds;
  return j;
}

}  // namespace user
