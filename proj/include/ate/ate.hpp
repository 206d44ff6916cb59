/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#ifndef ATE_ATE_HPP
#define ATE_ATE_HPP

#include "ate/bounds.hpp"
#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/estimators.hpp"
#include "ate/inference.hpp"
#include "ate/kdtree.hpp"
#include "ate/matching.hpp"
#include "ate/random.hpp"
#include "ate/regress.hpp"
#include "ate/simlab.hpp"

#endif  // ATE_ATE_HPP
