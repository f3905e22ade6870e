#pragma once

#include "qclean/vae/checkpoint.hpp"
#include "qclean/vae/gru.hpp"
#include "qclean/vae/model.hpp"
#include "qclean/vae/params.hpp"
#include "qclean/vae/train.hpp"
