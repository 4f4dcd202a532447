# Configuration Package
from config.settings import Config, get_config
from config.protocol import ProtocolConfig
