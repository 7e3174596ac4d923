"""
TCMN 模块包

句法树驱动的时序语言片段定位：自动微分、句法树、语言编码、视频片段、匹配、训练、集成、评估与数据。
"""
