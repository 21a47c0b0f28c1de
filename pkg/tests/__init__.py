# 测试包初始化文件__init__.py
