from hypothesis import HealthCheck, settings

settings.register_profile("qvilab", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qvilab")
